import init, { grid_angles, beam_scan, rate_curves, mse_curve } from "./pkg/simlab_demo.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);
const COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf"];

function parseCsv(text) {
  const series = new Map();
  for (const line of text.trim().split("\n").slice(1)) {
    const [, x, , metric, value] = line.split(",");
    if (!series.has(metric)) series.set(metric, []);
    series.get(metric).push([Number(x), Number(value)]);
  }
  return series;
}

// series: Map name -> [[x, y], ...]
function plot(canvas, series, { logY = false, logX = false, marker = null } = {}) {
  const ctx = canvas.getContext("2d");
  const W = canvas.width, H = canvas.height, pad = 48;
  ctx.clearRect(0, 0, W, H);
  const tx = logX ? Math.log10 : (v) => v;
  const ty = logY ? Math.log10 : (v) => v;
  const pts = [...series.values()].flat().filter(([x, y]) => isFinite(tx(x)) && isFinite(ty(y)));
  if (!pts.length) return;
  let [x0, x1] = [Math.min(...pts.map((p) => tx(p[0]))), Math.max(...pts.map((p) => tx(p[0])))];
  let [y0, y1] = [Math.min(...pts.map((p) => ty(p[1]))), Math.max(...pts.map((p) => ty(p[1])))];
  if (x1 === x0) x1 = x0 + 1;
  if (y1 === y0) y1 = y0 + 1;
  const sx = (v) => pad + ((tx(v) - x0) / (x1 - x0)) * (W - 2 * pad);
  const sy = (v) => H - pad + ((ty(v) - y0) / (y1 - y0)) * (2 * pad - H);

  ctx.strokeStyle = "#999";
  ctx.strokeRect(pad, pad / 2, W - 2 * pad, H - 1.5 * pad);
  ctx.fillStyle = "#444";
  ctx.font = "11px sans-serif";
  for (let i = 0; i <= 4; i++) {
    const yv = y0 + ((y1 - y0) * i) / 4, xv = x0 + ((x1 - x0) * i) / 4;
    const yl = logY ? `1e${yv.toFixed(1)}` : yv.toPrecision(3);
    const xl = logX ? (10 ** xv).toPrecision(3) : xv.toPrecision(3);
    ctx.fillText(yl, 2, H - pad + ((yv - y0) / (y1 - y0)) * (2 * pad - H) + 4);
    ctx.fillText(xl, pad + ((xv - x0) / (x1 - x0)) * (W - 2 * pad) - 10, H - pad + 16);
  }
  let c = 0;
  for (const [, data] of series) {
    ctx.strokeStyle = COLORS[c++ % COLORS.length];
    ctx.beginPath();
    data.filter(([x, y]) => isFinite(tx(x)) && isFinite(ty(y)))
      .forEach(([x, y], i) => (i ? ctx.lineTo(sx(x), sy(y)) : ctx.moveTo(sx(x), sy(y))));
    ctx.stroke();
  }
  if (marker !== null) {
    ctx.strokeStyle = "#000";
    ctx.setLineDash([4, 4]);
    ctx.beginPath();
    ctx.moveTo(sx(marker), pad / 2);
    ctx.lineTo(sx(marker), H - pad);
    ctx.stroke();
    ctx.setLineDash([]);
  }
}

function legend(el, names) {
  el.innerHTML = names.map((n, i) => `<span style="color:${COLORS[i % COLORS.length]}">■ ${n}</span>`).join("");
}

function guarded(fn) {
  return () => {
    try {
      $("status").textContent = "";
      fn();
    } catch (e) {
      $("status").textContent = String(e.message ?? e);
    }
  };
}

const scan = guarded(() => {
  const m = num("scan-m"), theta = num("scan-theta");
  $("scan-theta-v").textContent = theta.toFixed(1);
  const angles = grid_angles(m);
  const out = beam_scan(m, theta, num("scan-kappa"), num("scan-snr"), BigInt(num("scan-seed")));
  const best = out[out.length - 1];
  const power = Array.from(out.slice(0, -1), (p) => 10 * Math.log10(p / m + 1e-12));
  plot($("scan-plot"), new Map([["scan", power.map((p, i) => [angles[i], p])]]), { marker: theta });
  $("scan-info").textContent =
    `${angles.length} grid directions; strongest at ${angles[best].toFixed(2)}° (true ${theta.toFixed(2)}°). Power in dB relative to full array gain.`;
});

const rates = guarded(() => {
  const csv = rate_curves(num("rate-m"), num("rate-n"), num("rate-kappa"), num("rate-trials"), 1n);
  const s = parseCsv(csv);
  s.delete("zf_outage");
  plot($("rate-plot"), s);
  legend($("rate-legend"), [...s.keys()]);
});

const mse = guarded(() => {
  const s = parseCsv(mse_curve(num("mse-snr"), num("mse-n"), num("mse-trials"), 1n));
  plot($("mse-plot"), s, { logX: true, logY: true });
  legend($("mse-legend"), [...s.keys()]);
});

await init();
$("status").textContent = "";
for (const id of ["scan-m", "scan-theta", "scan-kappa", "scan-snr", "scan-seed"]) $(id).addEventListener("input", scan);
$("rate-run").addEventListener("click", rates);
$("mse-run").addEventListener("click", mse);
scan();
