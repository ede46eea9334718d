import init, { Demo, filterCurve } from "./pkg/etsim_web.js";

const POINTS = 600;
const $ = (id) => document.getElementById(id);
let demo = null;

function split(flat, parts) {
  const n = flat.length / parts;
  return Array.from({ length: parts }, (_, k) => flat.subarray(k * n, (k + 1) * n));
}

function plot(canvas, x, series, opts = {}) {
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  const pad = 30;
  ctx.clearRect(0, 0, w, h);
  const xmin = x[0], xmax = x[x.length - 1];
  const ymax = Math.max(...series.map((s) => Math.max(...s.values))) || 1;
  const px = (v) => pad + ((v - xmin) / (xmax - xmin)) * (w - 2 * pad);
  const py = (v) => h - pad - (v / ymax) * (h - 2 * pad);
  ctx.strokeStyle = "#999";
  ctx.beginPath();
  ctx.moveTo(pad, h - pad);
  ctx.lineTo(w - pad, h - pad);
  ctx.stroke();
  ctx.fillStyle = "#555";
  ctx.fillText(xmin.toPrecision(3), pad, h - 10);
  ctx.fillText(xmax.toPrecision(3), w - pad - 30, h - 10);
  ctx.fillText(opts.xlabel ?? "", w / 2 - 20, h - 10);
  for (const s of series) {
    ctx.strokeStyle = s.color;
    ctx.fillStyle = s.color;
    ctx.beginPath();
    if (s.bars) {
      const bw = (w - 2 * pad) / s.values.length;
      s.values.forEach((v, i) => ctx.fillRect(pad + i * bw, py(v), Math.max(bw - 1, 1), h - pad - py(v)));
    } else {
      s.values.forEach((v, i) => (i ? ctx.lineTo(px(x[i]), py(v)) : ctx.moveTo(px(x[i]), py(v))));
      ctx.stroke();
    }
  }
}

function rebuild() {
  const tauG = Number($("tau-g").value);
  const tauFp = Number($("tau-fp").value);
  $("tau-g-v").textContent = tauG;
  $("tau-fp-v").textContent = tauFp;
  try {
    demo?.free();
    demo = new Demo(tauG, tauFp);
    $("status").textContent = "";
  } catch (e) {
    demo = null;
    $("status").textContent = String(e);
    return;
  }
  const [t, std, col, p1] = split(demo.densities(), 4);
  plot($("densities"), t, [
    { values: p1, color: "#888" },
    { values: col, color: "#c0392b" },
    { values: std, color: "#1f6fb4" },
  ], { xlabel: "t" });
  const [s2, c2, r1, pc] = demo.summary();
  $("summary").textContent =
    `RMS t2: standard ${s2.toFixed(2)}, collapse ${c2.toFixed(2)}; RMS t1 ${r1.toFixed(2)}; ` +
    `coincidence probability ${pc.toExponential(3)}`;
  const [w, tr] = split(filterCurve(tauFp), 2);
  plot($("filter"), w, [{ values: tr, color: "#2c7" }], { xlabel: "omega" });
}

function sample(collapse) {
  if (!demo) return;
  const triggers = Number($("triggers").value);
  const seed = Number($("seed").value) >>> 0;
  const h = demo.sample(collapse, triggers, seed, 60);
  const [lo, hi] = [h[0], h[1]];
  const counts = h.subarray(2);
  const x = Float64Array.from({ length: counts.length }, (_, i) => lo + ((hi - lo) * (i + 0.5)) / counts.length);
  plot($("histogram"), x, [{ values: counts, color: collapse ? "#c0392b" : "#1f6fb4", bars: true }], { xlabel: "t2" });
  $("hist-note").textContent = `${collapse ? "collapse" : "standard"} backend, ${triggers} triggers, seed ${seed}`;
}

await init();
let pending = 0;
for (const id of ["tau-g", "tau-fp"]) {
  $(id).addEventListener("input", () => {
    clearTimeout(pending);
    pending = setTimeout(rebuild, 150);
  });
}
$("sample-std").addEventListener("click", () => sample(false));
$("sample-col").addEventListener("click", () => sample(true));
rebuild();
