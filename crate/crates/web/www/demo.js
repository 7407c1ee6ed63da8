// Built with: wasm-pack build crates/web --target web --out-dir www/pkg
import init, { ladder, drift_region, percolation } from "./pkg/brwlab_web.js";

const $ = (id) => document.getElementById(id);

function show(id, f) {
  const out = $(id);
  out.classList.remove("error");
  try {
    return f();
  } catch (e) {
    out.textContent = String(e);
    out.classList.add("error");
    return null;
  }
}

function plotLadder(rows) {
  const c = $("ladder-plot");
  const g = c.getContext("2d");
  g.clearRect(0, 0, c.width, c.height);
  if (rows.length === 0) return;
  const ys = rows.map((r) => r.nR);
  const lo = Math.min(...ys), hi = Math.max(...ys);
  const x = (i) => 30 + (i / Math.max(1, rows.length - 1)) * (c.width - 60);
  const y = (v) => c.height - 20 - ((v - lo) / (hi - lo || 1)) * (c.height - 40);
  g.beginPath();
  rows.forEach((r, i) => (i ? g.lineTo(x(i), y(r.nR)) : g.moveTo(x(i), y(r.nR))));
  g.stroke();
  rows.forEach((r, i) => g.fillRect(x(i) - 2, y(r.nR) - 2, 4, 4));
}

function runLadder() {
  const res = show("ladder-out", () => JSON.parse(ladder($("ladder-graph").value, Number($("ladder-radius").value))));
  if (!res) return;
  plotLadder(res.rows);
  $("ladder-out").textContent =
    res.rows.map((r) => `radius ${r.radius}\tnR ${r.nR.toFixed(10)}`).join("\n") + `\nlast value ${res.limit}`;
}

function runDrift() {
  const res = show("drift-out", () =>
    JSON.parse(drift_region(Number($("drift-p").value), Number($("drift-q").value), Number($("drift-lambda").value))),
  );
  if (!res) return;
  const c = $("drift-plot");
  const g = c.getContext("2d");
  g.clearRect(0, 0, c.width, c.height);
  const px = (a) => ((a + 1) / 2) * c.width;
  const py = (b) => c.height - b * c.height;
  for (const [a, b, v] of res.cells) {
    g.fillStyle = v > 1 ? `rgba(0,120,0,${Math.min(1, v - 1 + 0.2)})` : "rgba(200,200,200,0.6)";
    g.fillRect(px(a), py(b), c.width / 200 + 1, c.height / 100 + 1);
  }
  g.strokeStyle = "#c00";
  g.strokeRect(px(res.alpha[0]), py(res.beta[1]), px(res.alpha[1]) - px(res.alpha[0]), py(res.beta[0]) - py(res.beta[1]));
  $("drift-out").textContent =
    `alpha in [${res.alpha.map((v) => v.toFixed(2))}], beta in [${res.beta.map((v) => v.toFixed(2))}]\n` +
    `n = ${res.n}, d1 = ${res.d[0]}, d2 = ${res.d[1]}, d3 = ${res.d[2]}\nanchor error ${res.anchor_error}`;
}

function runPercolation() {
  const side = Number($("perc-side").value);
  const res = show("perc-out", () => JSON.parse(percolation(side, Number($("perc-p").value), Number($("perc-seed").value))));
  if (!res) return;
  const c = $("perc-plot");
  const g = c.getContext("2d");
  g.clearRect(0, 0, c.width, c.height);
  const cell = c.width / (side + 1);
  const pos = (i) => res.coords[i].map((v) => (v + 1) * cell);
  for (const [a, b] of res.open) {
    g.strokeStyle = res.labels[a] === 0 ? "#c00" : "#888";
    const [x1, y1] = pos(a), [x2, y2] = pos(b);
    g.beginPath();
    g.moveTo(x1, y1);
    g.lineTo(x2, y2);
    g.stroke();
  }
  res.coords.forEach((_, i) => {
    const [x, y] = pos(i);
    g.fillStyle = res.labels[i] === 0 ? "#c00" : "#333";
    g.fillRect(x - 1.5, y - 1.5, 3, 3);
  });
  const ls = res.lambda_s_largest === null ? "∞" : res.lambda_s_largest.toFixed(6);
  $("perc-out").textContent = `largest cluster ${res.largest} vertices (θ ≈ ${res.theta.toFixed(3)}), λ_s = ${ls}`;
}

await init();
$("ladder-run").addEventListener("click", runLadder);
$("drift-run").addEventListener("click", runDrift);
for (const id of ["perc-side", "perc-p", "perc-seed"]) $(id).addEventListener("input", runPercolation);
runLadder();
runDrift();
runPercolation();
