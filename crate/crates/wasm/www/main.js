import init, {
  ring_transmission, ring_pair_rate_mhz,
  waveguide_flux, waveguide_pair_rate_mhz,
  snr_curve, snr_optimum,
} from "./pkg/sipair_wasm.js";

const $ = (id) => document.getElementById(id);
const num = (id) => parseFloat($(id).value);

function pairs(flat) {
  const xs = [], ys = [];
  for (let i = 0; i < flat.length; i += 2) { xs.push(flat[i]); ys.push(flat[i + 1]); }
  return [xs, ys];
}

function plot(canvas, xs, ys, { logX = false, xLabel = "", yLabel = "" } = {}) {
  const ctx = canvas.getContext("2d");
  const W = canvas.width, H = canvas.height, m = { l: 70, r: 15, t: 15, b: 40 };
  ctx.clearRect(0, 0, W, H);
  const fx = logX ? Math.log10 : (v) => v;
  const finite = ys.filter(Number.isFinite);
  const x0 = fx(xs[0]), x1 = fx(xs[xs.length - 1]);
  let y0 = Math.min(...finite), y1 = Math.max(...finite);
  if (y0 === y1) { y0 -= 1; y1 += 1; }
  const px = (x) => m.l + (fx(x) - x0) / (x1 - x0) * (W - m.l - m.r);
  const py = (y) => H - m.b - (y - y0) / (y1 - y0) * (H - m.t - m.b);

  ctx.strokeStyle = "#888"; ctx.fillStyle = "#444"; ctx.font = "12px sans-serif";
  ctx.strokeRect(m.l, m.t, W - m.l - m.r, H - m.t - m.b);
  for (let k = 0; k <= 4; k++) {
    const yv = y0 + (y1 - y0) * k / 4;
    ctx.fillText(yv.toPrecision(3), 4, py(yv) + 4);
    const xv = logX ? 10 ** (x0 + (x1 - x0) * k / 4) : xs[0] + (xs[xs.length - 1] - xs[0]) * k / 4;
    ctx.fillText(xv.toPrecision(logX ? 2 : 6), px(xv) - 20, H - m.b + 16);
  }
  ctx.fillText(xLabel, W / 2 - 30, H - 6);
  ctx.save(); ctx.translate(12, H / 2); ctx.rotate(-Math.PI / 2); ctx.fillText(yLabel, -30, 0); ctx.restore();

  ctx.strokeStyle = "#1565c0"; ctx.lineWidth = 1.5; ctx.beginPath();
  let pen = false;
  xs.forEach((x, i) => {
    if (!Number.isFinite(ys[i])) { pen = false; return; }
    pen ? ctx.lineTo(px(x), py(ys[i])) : ctx.moveTo(px(x), py(ys[i]));
    pen = true;
  });
  ctx.stroke();
}

function guarded(out, f) {
  try { f(); out.classList.remove("error"); }
  catch (e) { out.textContent = String(e.message ?? e); out.classList.add("error"); }
}

function ring() {
  const out = $("ring-out");
  guarded(out, () => {
    const [xs, ys] = pairs(ring_transmission(num("ring-f"), num("ring-fin"), num("ring-lo"), num("ring-hi"), 2001));
    plot($("ring-plot"), xs, ys, { xLabel: "wavelength (nm)", yLabel: "transmission (dB)" });
    const r = ring_pair_rate_mhz(num("ring-f"), num("ring-fin"), num("ring-p"));
    out.textContent = `pair rate ${r.toFixed(2)} MHz at ${num("ring-p")} mW; dip ${Math.min(...ys).toFixed(1)} dB`;
  });
}

function waveguide() {
  const out = $("wg-out");
  guarded(out, () => {
    const [xs, ys] = pairs(waveguide_flux(num("wg-l"), num("wg-p"), 6e13, 601)).map((a) => a.reverse());
    plot($("wg-plot"), xs, ys, { xLabel: "wavelength (nm)", yLabel: "pairs / (Hz s)" });
    const r = waveguide_pair_rate_mhz(num("wg-l"), num("wg-p"));
    out.textContent = `peak ${Math.max(...ys).toExponential(3)} /(Hz s); total ${r.toFixed(1)} MHz`;
  });
}

function snr() {
  const out = $("snr-out");
  guarded(out, () => {
    const id = $("snr-setup").value, loss = num("snr-loss");
    const [xs, ys] = pairs(snr_curve(id, loss, 0.01, 1000, 300));
    plot($("snr-plot"), xs, ys, { logX: true, xLabel: "pair rate (MHz)", yLabel: "SNR" });
    const [rate, best] = snr_optimum(id, loss);
    out.textContent = `optimum SNR ${best.toFixed(1)} at ${rate.toFixed(3)} MHz`;
  });
}

await init();
for (const id of ["ring-f", "ring-fin", "ring-p", "ring-lo", "ring-hi"]) $(id).addEventListener("input", ring);
for (const id of ["wg-l", "wg-p"]) $(id).addEventListener("input", waveguide);
for (const id of ["snr-setup", "snr-loss"]) $(id).addEventListener("input", snr);
ring(); waveguide(); snr();
