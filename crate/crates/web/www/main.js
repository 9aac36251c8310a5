import init, { relaxation, spectrum, fluctuations } from "./pkg/jsq_web.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);
const model = () => [num("alpha"), num("beta"), Math.max(1, Math.round(num("choices")))];
const colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

function guarded(fn) {
  return () => {
    $("status").textContent = "";
    $("status").className = "";
    try {
      fn();
    } catch (e) {
      $("status").textContent = String(e);
      $("status").className = "err";
    }
  };
}

function plot(canvas, xs, series, opts = {}) {
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  const pad = 36;
  ctx.clearRect(0, 0, w, h);
  const ys = series.flat().filter(Number.isFinite);
  let lo = opts.lo ?? Math.min(...ys);
  let hi = opts.hi ?? Math.max(...ys);
  if (hi === lo) hi = lo + 1;
  const x0 = xs[0], x1 = xs[xs.length - 1] || 1;
  const px = (x) => pad + ((x - x0) / (x1 - x0 || 1)) * (w - 2 * pad);
  const py = (y) => h - pad - ((y - lo) / (hi - lo)) * (h - 2 * pad);
  ctx.strokeStyle = "#999";
  ctx.strokeRect(pad, pad, w - 2 * pad, h - 2 * pad);
  ctx.fillStyle = "#555";
  ctx.fillText(hi.toPrecision(3), 2, pad + 4);
  ctx.fillText(lo.toPrecision(3), 2, h - pad);
  ctx.fillText(String(x1.toPrecision(3)), w - pad - 20, h - pad + 14);
  series.forEach((ys, i) => {
    ctx.strokeStyle = colors[i % colors.length];
    ctx.beginPath();
    ys.forEach((y, j) => (j ? ctx.lineTo(px(xs[j]), py(y)) : ctx.moveTo(px(xs[j]), py(y))));
    ctx.stroke();
  });
}

function runRelaxation() {
  const r = JSON.parse(relaxation(...model(), num("t_end"), 400));
  const shown = Math.min(r.level, 5);
  const series = [];
  for (let k = 0; k < shown; k++) series.push(r.states.map((s) => s[k]));
  plot($("relax"), r.times, series, { lo: 0, hi: 1 });
  const last = r.sup_distance[r.sup_distance.length - 1];
  $("relax-info").textContent =
    `tails k = 1..${shown} from the empty system; K = ${r.level}; ` +
    `sup distance to the fixed point at the horizon: ${last.toExponential(3)}`;
}

function runSpectrum() {
  const r = JSON.parse(spectrum(...model()));
  const zeros = r.gap.zeros_by_degree;
  const degrees = zeros.map((z) => z.degree);
  plot($("zeros"), degrees, [zeros.map((z) => z.smallest), degrees.map(() => r.gap.gamma_hat)]);
  $("spectrum-info").textContent = JSON.stringify(
    {
      rho: r.rho,
      dimension: r.dimension,
      gamma_hat: r.gap.gamma_hat,
      gamma_extrapolated: r.gap.gamma_extrapolated,
      eigen_oracle: r.gap.eigen_oracle,
      upper_bound: r.gap.upper_bound,
      monotone: r.gap.monotone,
      interlacing: r.gap.interlacing,
    },
    null,
    2,
  );
}

function runFluctuations() {
  const seed = BigInt(Math.max(0, Math.round(num("ou_seed"))));
  const r = JSON.parse(fluctuations(...model(), num("ou_t"), num("ou_dt"), seed));
  const shown = Math.min(r.level, 3);
  const series = [];
  for (let k = 0; k < shown; k++) series.push(r.path.map((z) => z[k]));
  plot($("ou"), r.times, series);
  const block = r.covariance.slice(0, shown).map((row) => row.slice(0, shown).map((x) => x.toFixed(4)));
  $("ou-info").textContent =
    `Z(1..${shown}) on an exact path, dt = ${r.dt}, seed = ${r.seed}\n` +
    `stationary covariance (leading block):\n` +
    block.map((row) => row.join("  ")).join("\n");
}

await init();
$("run-relax").onclick = guarded(runRelaxation);
$("run-spectrum").onclick = guarded(runSpectrum);
$("run-ou").onclick = guarded(runFluctuations);
guarded(runRelaxation)();
