import init, { simulate, diagnostics, convergence } from "./pkg/stofv_web.js";

const $ = (id) => document.getElementById(id);
const canvas = $("plot");
const ctx = canvas.getContext("2d");
let sim = null;

function config() {
  const sigma = Number($("sigma").value);
  const initial = {
    sine: { name: "sine", amplitude: 0.5 },
    riemann: { name: "riemann", left: 1, right: 0 },
    random: { name: "random", lo: -0.8, hi: 0.8, seed: Number($("seed").value) },
  }[$("initial").value];
  return {
    grid: { m: Number($("m").value) },
    flux: { name: $("flux").value, numerical: $("numerical").value },
    noise: { modes: sigma > 0 ? [{ sigma, kappa: [1], trig: "sin" }, { sigma: sigma / 2, kappa: [2], trig: "cos" }] : [], seed: Number($("seed").value) },
    time: { t_final: Number($("t_final").value) },
    initial,
    diagnostics: { weak_bv: false, phi_square: false },
  };
}

function call(f, cfg) {
  $("status").textContent = "";
  try {
    return JSON.parse(f(JSON.stringify(cfg)));
  } catch (e) {
    $("status").textContent = String(e);
    return null;
  }
}

function plot(series, { xlabel = "", logy = false } = {}) {
  const w = canvas.width, h = canvas.height, pad = 40;
  ctx.clearRect(0, 0, w, h);
  const tf = (y) => (logy ? Math.log10(y) : y);
  const xs = series.flatMap((s) => s.x), ys = series.flatMap((s) => s.y.map(tf));
  let [x0, x1] = [Math.min(...xs), Math.max(...xs)];
  let [y0, y1] = [Math.min(...ys), Math.max(...ys)];
  if (y1 - y0 < 1e-12) { y0 -= 1; y1 += 1; }
  if (x1 - x0 < 1e-12) { x1 = x0 + 1; }
  const px = (x) => pad + ((x - x0) / (x1 - x0)) * (w - 2 * pad);
  const py = (y) => h - pad - ((tf(y) - y0) / (y1 - y0)) * (h - 2 * pad);
  ctx.strokeStyle = "#999";
  ctx.strokeRect(pad, pad, w - 2 * pad, h - 2 * pad);
  ctx.fillStyle = "#444";
  ctx.fillText((logy ? "1e" : "") + y1.toPrecision(3), 2, pad);
  ctx.fillText((logy ? "1e" : "") + y0.toPrecision(3), 2, h - pad);
  ctx.fillText(x0.toPrecision(3), pad, h - pad + 14);
  ctx.fillText(x1.toPrecision(3) + " " + xlabel, w - pad - 60, h - pad + 14);
  series.forEach((s, i) => {
    ctx.strokeStyle = s.color || ["#1f77b4", "#d62728", "#2ca02c"][i % 3];
    ctx.beginPath();
    s.x.forEach((x, j) => (j ? ctx.lineTo(px(x), py(s.y[j])) : ctx.moveTo(px(x), py(s.y[j]))));
    ctx.stroke();
    ctx.fillStyle = ctx.strokeStyle;
    ctx.fillText(s.label || "", pad + 8, pad + 14 * (i + 1));
  });
}

function table(headers, rows) {
  const fmt = (v) => (typeof v === "number" ? (Number.isInteger(v) ? v : v.toExponential(3)) : v ?? "");
  $("table").innerHTML =
    "<table><tr>" + headers.map((h) => `<th>${h}</th>`).join("") + "</tr>" +
    rows.map((r) => "<tr>" + r.map((v) => `<td>${fmt(v)}</td>`).join("") + "</tr>").join("") + "</table>";
}

function showFrame(k) {
  const f = sim.frames[k];
  plot([{ x: sim.x, y: f, label: "v(t)" }, { x: sim.x, y: sim.frames[0], label: "v(0)", color: "#bbb" }], { xlabel: "x" });
  $("time").textContent = `t = ${sim.times[k].toFixed(4)}`;
}

$("simulate").onclick = () => {
  sim = call(simulate, config());
  if (!sim) return;
  const slider = $("frame");
  slider.max = sim.frames.length - 1;
  slider.value = slider.max;
  slider.disabled = false;
  showFrame(sim.frames.length - 1);
  table(["t", "mass", "½‖v‖²"], sim.times.map((t, i) => [t, sim.mass[i], sim.energy[i]]).filter((_, i, a) => i % Math.ceil(a.length / 10) === 0 || i === a.length - 1));
};

$("frame").oninput = (e) => sim && showFrame(Number(e.target.value));

$("diagnose").onclick = () => {
  const r = call(diagnostics, config());
  if (!r) return;
  const t = r.ledger.map((row) => row.t);
  plot(
    [
      { x: t, y: r.ledger.map((row) => row.half_energy_post), label: "½‖v^(n+1)‖²" },
      { x: t, y: r.ledger.map((row) => row.dissipation), label: "dissipation per step" },
      { x: t, y: r.ledger.map((row) => row.noise_input), label: "noise input per step" },
    ],
    { xlabel: "t" },
  );
  table(
    ["steps", "max |energy residual|", "total dissipation", "total noise input", "min m", "all checks"],
    [[r.steps, r.max_energy_residual, r.dissipation_total, r.noise_input_total, r.min_dissipation, String(Object.values(r.checks).every((c) => !c || c.pass !== false))]],
  );
};

$("converge").onclick = () => {
  const cfg = config();
  cfg.initial = { name: "riemann", left: 1, right: 0 };
  cfg.flux.name = "burgers";
  cfg.time.t_final = Math.min(cfg.time.t_final, 0.9);
  cfg.refinement = { levels: [16, 32, 64, 128, 256] };
  const r = call(convergence, cfg);
  if (!r) return;
  const rows = r.table.rows;
  plot([{ x: rows.map((row) => Math.log10(row.h)), y: rows.map((row) => row.error), label: `L¹ error, fitted order ${r.fitted_order.toFixed(2)}` }], { xlabel: "log10 h", logy: true });
  table(["m", "h", "Δt", "L¹ error", "order"], rows.map((row) => [row.m, row.h, row.dt, row.error, row.order]));
};

await init();
$("simulate").click();
