/**
 * Browser wiring: a drawing canvas over an optional reference image, a
 * contour/detail mode toolbar, mask tools, a prompt box, and a result
 * gallery fed by generation jobs. Contour strokes render blue, detail
 * strokes red.
 */

import { StudioClient } from "./api.js";
import { CanvasDocument } from "./document.js";
import { fillPolygon, maskToRle } from "./raster.js";
import type { StrokeKind } from "./strokes.js";

const STROKE_COLORS: Record<StrokeKind, string> = { contour: "#1f5fd0", detail: "#d03030" };

export function mountStudio(root: HTMLElement, serverUrl = ""): void {
  const client = new StudioClient(serverUrl);
  const doc = new CanvasDocument();

  root.innerHTML = `
    <div class="studio">
      <div class="toolbar">
        <button data-mode="contour" class="active">contour (blue)</button>
        <button data-mode="detail">detail (red)</button>
        <button data-act="mask">polygon mask</button>
        <button data-act="undo">undo</button>
        <button data-act="redo">redo</button>
        <select data-role="concept"><option value="">concept…</option></select>
        <input data-role="prompt" placeholder="a photo of [v] in the snow" size="36" />
        <button data-act="generate">generate</button>
        <span data-role="status"></span>
      </div>
      <canvas width="512" height="512"></canvas>
      <div class="gallery"></div>
    </div>`;

  const canvas = root.querySelector("canvas")!;
  const ctx = canvas.getContext("2d")!;
  const statusEl = root.querySelector("[data-role=status]") as HTMLElement;
  const gallery = root.querySelector(".gallery") as HTMLElement;
  const promptEl = root.querySelector("[data-role=prompt]") as HTMLInputElement;
  const conceptEl = root.querySelector("[data-role=concept]") as HTMLSelectElement;

  let mode: StrokeKind = "contour";
  let maskMode = false;
  let path: [number, number][] = [];
  let maskVertices: [number, number][] = [];

  client
    .concepts()
    .then((concepts) => {
      for (const c of concepts) {
        const option = document.createElement("option");
        option.value = c.id;
        option.textContent = `${c.id} (${c.class_name})`;
        conceptEl.appendChild(option);
      }
    })
    .catch((err) => showStatus(`server unreachable: ${err}`));

  function showStatus(text: string): void {
    statusEl.textContent = text;
  }

  function toUnit(event: PointerEvent): [number, number] {
    const rect = canvas.getBoundingClientRect();
    return [
      (event.clientX - rect.left) / rect.width,
      (event.clientY - rect.top) / rect.height,
    ];
  }

  function redraw(): void {
    ctx.fillStyle = "#ffffff";
    ctx.fillRect(0, 0, canvas.width, canvas.height);
    const state = doc.current;
    if (state.mask && state.mask.kind === "polygon") {
      ctx.fillStyle = "rgba(120,180,120,0.25)";
      ctx.beginPath();
      state.mask.vertices.forEach(([x, y], i) => {
        if (i === 0) ctx.moveTo(x * canvas.width, y * canvas.height);
        else ctx.lineTo(x * canvas.width, y * canvas.height);
      });
      ctx.closePath();
      ctx.fill();
    }
    for (const stroke of doc.strokes) {
      ctx.strokeStyle = STROKE_COLORS[stroke.kind];
      ctx.lineWidth = stroke.width * (canvas.width / 64);
      ctx.beginPath();
      stroke.points.forEach(([x, y], i) => {
        if (i === 0) ctx.moveTo(x * canvas.width, y * canvas.height);
        else ctx.lineTo(x * canvas.width, y * canvas.height);
      });
      ctx.stroke();
    }
  }

  canvas.addEventListener("pointerdown", (event) => {
    if (maskMode) {
      maskVertices.push(toUnit(event));
      if (maskVertices.length >= 3) showStatus(`${maskVertices.length} mask vertices (double-click to close)`);
      return;
    }
    path = [toUnit(event)];
    canvas.setPointerCapture(event.pointerId);
  });
  canvas.addEventListener("pointermove", (event) => {
    if (maskMode || path.length === 0) return;
    path.push(toUnit(event));
    redraw();
    ctx.strokeStyle = STROKE_COLORS[mode];
    ctx.lineWidth = canvas.width / 64;
    ctx.beginPath();
    path.forEach(([x, y], i) => {
      if (i === 0) ctx.moveTo(x * canvas.width, y * canvas.height);
      else ctx.lineTo(x * canvas.width, y * canvas.height);
    });
    ctx.stroke();
  });
  canvas.addEventListener("pointerup", () => {
    if (maskMode) return;
    if (!doc.drawStroke(mode, path)) showStatus("stroke too short, discarded");
    path = [];
    redraw();
  });
  canvas.addEventListener("dblclick", () => {
    if (!maskMode) return;
    try {
      doc.setMask({ kind: "polygon", vertices: maskVertices });
      showStatus(`mask set (${maskVertices.length} vertices)`);
    } catch (err) {
      showStatus(String(err));
    }
    maskVertices = [];
    maskMode = false;
    redraw();
  });

  root.querySelectorAll("[data-mode]").forEach((button) => {
    button.addEventListener("click", () => {
      mode = (button as HTMLElement).dataset.mode as StrokeKind;
      root.querySelectorAll("[data-mode]").forEach((b) => b.classList.remove("active"));
      button.classList.add("active");
    });
  });

  root.querySelector("[data-act=mask]")!.addEventListener("click", () => {
    maskMode = true;
    maskVertices = [];
    showStatus("click polygon vertices, double-click to close (or leave empty for auto)");
  });
  root.querySelector("[data-act=undo]")!.addEventListener("click", () => {
    doc.undo();
    redraw();
  });
  root.querySelector("[data-act=redo]")!.addEventListener("click", () => {
    doc.redo();
    redraw();
  });

  root.querySelector("[data-act=generate]")!.addEventListener("click", async () => {
    const conceptId = conceptEl.value;
    const prompt = promptEl.value.trim();
    if (!conceptId) return showStatus("pick a concept first");
    if (!prompt) return showStatus("prompt is empty");
    if (doc.strokes.length === 0 && !window.confirm("no strokes drawn; generate anyway?")) {
      return;
    }
    doc.setPrompt(prompt);
    doc.linkConcept(conceptId);
    const state = doc.current;
    const mask =
      state.mask && state.mask.kind === "polygon"
        ? maskToRle(fillPolygon(state.mask.vertices, 64, 64), 64, 64)
        : null;
    showStatus("submitting…");
    try {
      const handle = await client.submitGenerate({
        conceptId,
        strokes: doc.strokes,
        prompt,
        seed: Math.floor(Math.random() * 1e6),
        mask,
      });
      showStatus(`job ${handle.id} running…`);
      const record = await client.poll(handle);
      if (record.status === "failed") return showStatus(`job failed: ${record.error}`);
      const png = await client.jobResultPng(handle.id);
      const img = document.createElement("img");
      img.width = 256;
      img.height = 256;
      img.style.imageRendering = "pixelated";
      img.src = URL.createObjectURL(new Blob([png.slice().buffer], { type: "image/png" }));
      gallery.prepend(img);
      showStatus(`done (gallery: ${gallery.children.length})`);
    } catch (err) {
      // 4xx from the server (e.g. busy concept) surfaces inline, document intact
      showStatus(String(err));
    }
  });

  redraw();
}

declare global {
  interface Window {
    mountStudio?: typeof mountStudio;
  }
}

if (typeof window !== "undefined") {
  window.mountStudio = mountStudio;
}
