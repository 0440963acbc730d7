import init, { basin_image, rays, rotation_staircase } from "./pkg/touchpoint_web.js";

const $ = (id) => document.getElementById(id);
const plane = $("plane").getContext("2d");
const stair = $("stair").getContext("2d");
let rhoArg = 0.6136;
let view = null;

function mapName() {
  const m = $("map").value;
  return m === "ftheta" ? `ftheta:${rhoArg}` : m;
}

function status(text) {
  $("status").textContent = text;
}

function timed(label, f) {
  const t0 = performance.now();
  try {
    f();
    status(`${label} in ${((performance.now() - t0) / 1000).toFixed(2)} s`);
  } catch (e) {
    status(`${label} failed: ${e}`);
  }
}

function drawBasins() {
  const w = $("window").value.split(",").map(Number);
  const res = Number($("res").value);
  timed("basins", () => {
    const px = basin_image(mapName(), res, w[0], w[1], w[2], w[3], 300);
    const img = new ImageData(new Uint8ClampedArray(px), res, res);
    const tmp = document.createElement("canvas");
    tmp.width = tmp.height = res;
    tmp.getContext("2d").putImageData(img, 0, 0);
    plane.imageSmoothingEnabled = false;
    plane.drawImage(tmp, 0, 0, 512, 512);
    view = w;
  });
}

function drawRays() {
  if (!view) drawBasins();
  const [x0, x1, y0, y1] = view;
  const sx = (x) => ((x - x0) / (x1 - x0)) * 512;
  const sy = (y) => ((y1 - y) / (y1 - y0)) * 512;
  timed("rays", () => {
    const v = rays(mapName(), Number($("basin").value), Number($("q").value));
    plane.strokeStyle = "#fff";
    plane.lineWidth = 1;
    plane.beginPath();
    let pen = false;
    for (let k = 0; k < v.length; k += 2) {
      if (Number.isNaN(v[k])) {
        pen = false;
        continue;
      }
      if (pen) plane.lineTo(sx(v[k]), sy(v[k + 1]));
      else plane.moveTo(sx(v[k]), sy(v[k + 1]));
      pen = true;
    }
    plane.stroke();
  });
}

function drawStaircase() {
  const W = 360, H = 240, n = 360;
  timed("staircase", () => {
    const s = rotation_staircase(n, 4000);
    stair.clearRect(0, 0, W, H);
    stair.fillStyle = "#246";
    s.forEach((t, k) => stair.fillRect((k / n) * W, H - t * H - 1, 1.5, 2));
    markRho();
  });
}

function markRho() {
  stair.strokeStyle = "#c33";
  stair.beginPath();
  stair.moveTo(rhoArg * 360, 0);
  stair.lineTo(rhoArg * 360, 240);
  stair.stroke();
  $("rho").textContent = `arg(rho)/2π = ${rhoArg.toFixed(4)}`;
}

$("stair").addEventListener("click", (e) => {
  const r = e.target.getBoundingClientRect();
  rhoArg = Math.min(Math.max((e.clientX - r.left) / r.width, 0), 0.9999);
  $("map").value = "ftheta";
  drawStaircase();
  drawBasins();
});
$("draw").addEventListener("click", drawBasins);
$("rays").addEventListener("click", drawRays);
$("staircase").addEventListener("click", drawStaircase);

await init();
drawBasins();
