// Build the wasm module with wasm-bindgen (--target web) into ./pkg first.
import init, * as mc from "./pkg/motocrash_web.js";

const $ = (id) => document.getElementById(id);

function plotLines(canvas, xs, series, opts = {}) {
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  const pad = { l: 56, r: 12, t: 12, b: 28 };
  ctx.clearRect(0, 0, w, h);
  const all = series.flatMap((s) => s.ys).filter(Number.isFinite);
  let lo = Math.min(...all), hi = Math.max(...all);
  if (hi - lo < 1e-9) { lo -= 0.5; hi += 0.5; }
  const x0 = xs[0], x1 = xs[xs.length - 1];
  const px = (x) => pad.l + ((x - x0) / (x1 - x0)) * (w - pad.l - pad.r);
  const py = (y) => h - pad.b - ((y - lo) / (hi - lo)) * (h - pad.t - pad.b);
  ctx.font = "11px sans-serif";
  ctx.strokeStyle = "#ddd";
  ctx.fillStyle = "#555";
  for (let k = 0; k <= 4; k++) {
    const y = lo + ((hi - lo) * k) / 4;
    ctx.beginPath(); ctx.moveTo(pad.l, py(y)); ctx.lineTo(w - pad.r, py(y)); ctx.stroke();
    ctx.fillText(y.toPrecision(3), 4, py(y) + 4);
    const x = x0 + ((x1 - x0) * k) / 4;
    ctx.fillText(x.toPrecision(3), px(x) - 10, h - 8);
  }
  if (opts.shadeFrom !== undefined && Number.isFinite(opts.shadeFrom)) {
    ctx.fillStyle = "rgba(214, 39, 40, 0.08)";
    ctx.fillRect(px(opts.shadeFrom), pad.t, w - pad.r - px(opts.shadeFrom), h - pad.t - pad.b);
  }
  for (const s of series) {
    ctx.strokeStyle = s.color;
    ctx.lineWidth = 1.5;
    ctx.beginPath();
    s.ys.forEach((y, i) => (i ? ctx.lineTo(px(xs[i]), py(y)) : ctx.moveTo(px(xs[i]), py(y))));
    ctx.stroke();
  }
}

// --- road profiles -------------------------------------------------------

function drawRoad() {
  const kind = $("road-kind").value;
  const sine = kind === "sine";
  $("sine-controls").style.display = sine ? "" : "none";
  $("obstacle-controls").style.display = sine ? "none" : "";
  let heights;
  if (sine) {
    for (const id of ["amp", "phase", "noise"]) $(id + "-out").textContent = $(id).value;
    heights = mc.road_sine(+$("amp").value, +$("phase").value, +$("noise").value, 1);
  } else {
    $("size-out").textContent = $("size").value + " m";
    heights = mc.road_obstacle(kind, +$("size").value);
  }
  const dx = mc.road_spacing();
  const xs = Array.from(heights, (_, i) => i * dx);
  plotLines($("road"), xs, [{ ys: Array.from(heights), color: "#444" }]);
}

function setupRoad() {
  const sel = $("road-kind");
  sel.add(new Option("sinusoid + noise", "sine"));
  for (const k of mc.obstacle_kinds()) sel.add(new Option(k, k));
  sel.onchange = () => {
    if (sel.value !== "sine") {
      const [lo, hi] = mc.obstacle_size_range(sel.value);
      Object.assign($("size"), { min: lo, max: hi, value: hi });
    }
    drawRoad();
  };
  for (const id of ["amp", "phase", "noise", "size"]) $(id).oninput = drawRoad;
  drawRoad();
}

// --- LHS scatter ---------------------------------------------------------

function drawLhs() {
  const set = $("lhs-set").value;
  const n = +$("lhs-n").value;
  $("lhs-n-out").textContent = n;
  const dims = mc.lhs_dimensions(set);
  const pts = mc.lhs_design(set, n, Math.max(0, +$("lhs-seed").value | 0));
  const d = dims.length;
  const jx = Math.min(+$("lhs-x").value || 0, d - 1), jy = Math.min(+$("lhs-y").value || 1, d - 1);
  const c = $("lhs"), ctx = c.getContext("2d"), s = c.width - 40;
  ctx.clearRect(0, 0, c.width, c.height);
  ctx.strokeStyle = "#eee";
  for (let k = 0; k <= n; k++) {
    const v = 20 + (s * k) / n;
    ctx.beginPath(); ctx.moveTo(v, 20); ctx.lineTo(v, 20 + s); ctx.stroke();
    ctx.beginPath(); ctx.moveTo(20, v); ctx.lineTo(20 + s, v); ctx.stroke();
  }
  ctx.fillStyle = "#1f77b4";
  for (let i = 0; i < n; i++) {
    const x = 20 + pts[i * d + jx] * s, y = 20 + (1 - pts[i * d + jy]) * s;
    ctx.beginPath(); ctx.arc(x, y, 4, 0, 2 * Math.PI); ctx.fill();
  }
  ctx.fillStyle = "#555";
  ctx.font = "12px sans-serif";
  ctx.fillText(dims[jx] + " →", c.width - 120, c.height - 4);
  ctx.fillText("↑ " + dims[jy], 2, 14);
}

function setupLhs() {
  const fillDims = () => {
    const dims = mc.lhs_dimensions($("lhs-set").value);
    for (const [id, def] of [["lhs-x", 0], ["lhs-y", 1]]) {
      const sel = $(id);
      sel.innerHTML = "";
      dims.forEach((name, i) => sel.add(new Option(name, i)));
      sel.value = Math.min(def, dims.length - 1);
    }
    drawLhs();
  };
  $("lhs-set").onchange = fillDims;
  for (const id of ["lhs-n", "lhs-seed", "lhs-x", "lhs-y"]) $(id).oninput = drawLhs;
  fillDims();
}

// --- crash traces --------------------------------------------------------

let traces = null;

function drawCrash() {
  if (!traces) return;
  const ch = +$("cs-channel").value;
  const xs = Array.from(traces.times());
  const ys = Array.from(traces.channel(ch));
  plotLines($("crash"), xs, [{ ys, color: "#d62728" }], { shadeFrom: traces.contact_time() });
}

function runCrash() {
  for (const id of ["cs-speed", "cs-alpha", "cs-offset"]) $(id + "-out").textContent = $(id).value;
  const t0 = performance.now();
  try {
    traces = mc.crash_traces(+$("cs-speed").value, +$("cs-alpha").value, +$("cs-offset").value, 2000);
    const contact = traces.contact_time();
    $("cs-info").textContent = Number.isFinite(contact)
      ? `contact at ${(contact * 1000).toFixed(1)} ms (shaded: crash label); ${(performance.now() - t0).toFixed(0)} ms to simulate`
      : "no contact";
  } catch (e) {
    traces = null;
    $("cs-info").textContent = String(e);
  }
  drawCrash();
}

function setupCrash() {
  const sel = $("cs-channel");
  mc.channel_labels().forEach((name, i) => sel.add(new Option(name, i)));
  sel.value = 13;
  sel.onchange = drawCrash;
  $("cs-run").onclick = runCrash;
  for (const id of ["cs-speed", "cs-alpha", "cs-offset"]) $(id).oninput = () => ($(id + "-out").textContent = $(id).value);
  runCrash();
}

init().then(() => {
  $("status").textContent = "";
  setupRoad();
  setupLhs();
  setupCrash();
}).catch((e) => ($("status").textContent = "Failed to load the wasm module: " + e));
