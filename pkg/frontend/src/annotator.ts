/**
 * Pair annotator: two side-by-side canvases on which the user clicks
 * four matching landmarks per photograph. Picks snap to integer pixel
 * coordinates of the full-resolution image no matter the zoom, points
 * stay draggable until submit, and the submitted payload is checked
 * against the same degeneracy rule the server enforces.
 */

import * as api from './api.js';
import type { ImageRecord, Point } from './api.js';
import { el, errorText } from './dom.js';
import { checkQuad, type QuadCheck } from './quad.js';
import type { Session } from './session.js';

export const CANVAS_W = 480;
export const CANVAS_H = 360;
export const HIT_RADIUS = 8; // px on screen, not in the image
export const CLICK_SLOP = 4; // px of motion that turns a click into a drag
export const ZOOM_STEP = 1.2;
export const POINT_COLOR = '#3fa7ff';
export const HIGHLIGHT_COLOR = '#ff5252';
const OUTLINE_COLOR = 'rgba(63, 167, 255, 0.8)';

function clampInt(value: number, lo: number, hi: number): number {
  return Math.min(hi, Math.max(lo, Math.round(value)));
}

/** One canvas, its photograph, and up to four picked points. */
export class PointPicker {
  readonly canvas: HTMLCanvasElement;
  points: Point[] = [];
  highlighted = new Set<number>();
  onChange: () => void = () => {};

  private readonly record: ImageRecord;
  private readonly ctx: CanvasRenderingContext2D;
  private readonly photo: HTMLImageElement;
  private readonly fitScale: number;
  private scale: number;
  private panX: number;
  private panY: number;
  private drag: { pointIndex: number; moved: boolean;
                  startX: number; startY: number;
                  lastX: number; lastY: number } | null = null;

  constructor(record: ImageRecord, side: 'a' | 'b') {
    this.record = record;
    this.canvas = el('canvas', 'picker');
    this.canvas.width = CANVAS_W;
    this.canvas.height = CANVAS_H;
    this.canvas.dataset.side = side;
    this.ctx = this.canvas.getContext('2d')!;

    this.photo = new Image();
    this.photo.addEventListener('load', () => this.draw());
    this.photo.src = record.file;

    this.fitScale = Math.min(CANVAS_W / record.width,
                             CANVAS_H / record.height);
    this.scale = this.fitScale;
    this.panX = (CANVAS_W - record.width * this.scale) / 2;
    this.panY = (CANVAS_H - record.height * this.scale) / 2;

    this.canvas.addEventListener('mousedown', (ev) => this.onMouseDown(ev));
    this.canvas.addEventListener('mousemove', (ev) => this.onMouseMove(ev));
    this.canvas.addEventListener('mouseup', (ev) => this.onMouseUp(ev));
    this.canvas.addEventListener('mouseleave', () => { this.drag = null; });
    this.canvas.addEventListener('wheel', (ev) => this.onWheel(ev));
    this.draw();
  }

  /** Continuous image coordinates under the cursor. */
  private toImage(ev: MouseEvent): [number, number] {
    const rect = this.canvas.getBoundingClientRect();
    return [(ev.clientX - rect.left - this.panX) / this.scale,
            (ev.clientY - rect.top - this.panY) / this.scale];
  }

  /** Canvas-relative position of an image point. */
  private toCanvas(point: Point): [number, number] {
    return [point[0] * this.scale + this.panX,
            point[1] * this.scale + this.panY];
  }

  /** Picks live on the integer pixel grid of the stored image. */
  private snap(image: [number, number]): Point {
    return [clampInt(image[0], 0, this.record.width - 1),
            clampInt(image[1], 0, this.record.height - 1)];
  }

  private hitIndex(ev: MouseEvent): number {
    const rect = this.canvas.getBoundingClientRect();
    const x = ev.clientX - rect.left;
    const y = ev.clientY - rect.top;
    for (let i = this.points.length - 1; i >= 0; i--) {
      const [cx, cy] = this.toCanvas(this.points[i]);
      if (Math.hypot(cx - x, cy - y) <= HIT_RADIUS) return i;
    }
    return -1;
  }

  private onMouseDown(ev: MouseEvent): void {
    ev.preventDefault();
    this.drag = { pointIndex: this.hitIndex(ev), moved: false,
                  startX: ev.clientX, startY: ev.clientY,
                  lastX: ev.clientX, lastY: ev.clientY };
  }

  private onMouseMove(ev: MouseEvent): void {
    const drag = this.drag;
    if (!drag) return;
    if (Math.max(Math.abs(ev.clientX - drag.startX),
                 Math.abs(ev.clientY - drag.startY)) > CLICK_SLOP) {
      drag.moved = true;
    }
    if (drag.pointIndex >= 0) {
      this.points[drag.pointIndex] = this.snap(this.toImage(ev));
      this.onChange();
      this.draw();
    } else if (drag.moved) {
      this.panX += ev.clientX - drag.lastX;
      this.panY += ev.clientY - drag.lastY;
      this.draw();
    }
    drag.lastX = ev.clientX;
    drag.lastY = ev.clientY;
  }

  private onMouseUp(ev: MouseEvent): void {
    const drag = this.drag;
    if (!drag) return;
    this.drag = null;
    if (drag.pointIndex === -1 && !drag.moved && this.points.length < 4) {
      this.points.push(this.snap(this.toImage(ev)));
      this.onChange();
      this.draw();
    }
  }

  private onWheel(ev: WheelEvent): void {
    ev.preventDefault();
    const rect = this.canvas.getBoundingClientRect();
    const x = ev.clientX - rect.left;
    const y = ev.clientY - rect.top;
    const factor = ev.deltaY < 0 ? ZOOM_STEP : 1 / ZOOM_STEP;
    const next = Math.min(32, Math.max(this.fitScale / 4,
                                       this.scale * factor));
    const ratio = next / this.scale;
    this.panX = x - (x - this.panX) * ratio;
    this.panY = y - (y - this.panY) * ratio;
    this.scale = next;
    this.draw();
  }

  clear(): void {
    this.points.length = 0;
    this.onChange();
    this.draw();
  }

  draw(): void {
    const g = this.ctx;
    g.clearRect(0, 0, CANVAS_W, CANVAS_H);
    g.fillStyle = '#20242a';
    g.fillRect(0, 0, CANVAS_W, CANVAS_H);

    g.save();
    g.translate(this.panX, this.panY);
    g.scale(this.scale, this.scale);
    g.drawImage(this.photo, 0, 0, this.record.width, this.record.height);
    g.restore();

    if (this.points.length >= 2) {
      g.beginPath();
      const [x0, y0] = this.toCanvas(this.points[0]);
      g.moveTo(x0, y0);
      for (const point of this.points.slice(1)) {
        const [x, y] = this.toCanvas(point);
        g.lineTo(x, y);
      }
      if (this.points.length === 4) g.closePath();
      g.strokeStyle = OUTLINE_COLOR;
      g.lineWidth = 1.5;
      g.stroke();
    }

    this.points.forEach((point, i) => {
      const [x, y] = this.toCanvas(point);
      g.beginPath();
      g.arc(x, y, 6, 0, 2 * Math.PI);
      g.fillStyle = this.highlighted.has(i) ? HIGHLIGHT_COLOR : POINT_COLOR;
      g.fill();
      g.strokeStyle = '#ffffff';
      g.lineWidth = 1;
      g.stroke();
      g.fillStyle = '#ffffff';
      g.font = '12px sans-serif';
      g.fillText(String(i + 1), x + 9, y - 9);
    });
  }
}

function pane(record: ImageRecord, picker: PointPicker,
              status: HTMLElement): HTMLElement {
  const box = el('div', 'pane');
  const header = el('div', 'pane-header');
  header.appendChild(el('span', 'pane-name', record.title ?? record.id));
  header.appendChild(el('span', 'pane-meta',
                        `${record.width}x${record.height}, `
                        + (record.capture_date ?? 'undated')));
  box.appendChild(header);
  box.appendChild(picker.canvas);
  box.appendChild(status);
  return box;
}

export function renderAnnotator(session: Session, a: ImageRecord,
                                b: ImageRecord): void {
  const root = session.view;
  root.innerHTML = '';
  root.className = 'view annotator';

  root.appendChild(el('h2', 'pair-title',
                      `Link ${a.title ?? a.id} and ${b.title ?? b.id}`));
  root.appendChild(el('p', 'hint',
                      'Click four matching landmarks on each photograph, in '
                      + 'the same order on both sides. Drag a point to '
                      + 'adjust it; scroll to zoom.'));

  const pickerA = new PointPicker(a, 'a');
  const pickerB = new PointPicker(b, 'b');
  const statusA = el('p', 'pick-status', '0 of 4 points');
  const statusB = el('p', 'pick-status', '0 of 4 points');

  const panes = el('div', 'panes');
  panes.appendChild(pane(a, pickerA, statusA));
  panes.appendChild(pane(b, pickerB, statusB));
  root.appendChild(panes);

  const note = el('div', 'note');
  note.hidden = true;
  root.appendChild(note);

  const controls = el('div', 'controls');
  const submit = el('button', 'submit-link', 'Submit link');
  submit.disabled = true;
  const clear = el('button', 'clear-points', 'Clear points');
  const cancel = el('button', 'back', 'Back to groups');
  controls.append(submit, clear, cancel);
  root.appendChild(controls);

  const preview = el('figure', 'preview');
  preview.hidden = true;
  const previewImage = el('img', 'preview-image');
  const previewCaption = el('figcaption', 'preview-caption');
  preview.append(previewImage, previewCaption);
  root.appendChild(preview);

  // true once a degeneracy warning was shown; the next submit sends anyway
  let armed = false;
  let previewUrl: string | null = null;

  function setNote(text: string, kind: 'warn' | 'error' | 'info',
                   actions: { label: string; onClick: () => void }[] = []):
      void {
    note.hidden = false;
    note.className = `note note-${kind}`;
    note.textContent = '';
    note.appendChild(el('span', 'note-text', text));
    for (const action of actions) {
      const button = el('button', 'note-action', action.label);
      button.addEventListener('click', action.onClick);
      note.appendChild(button);
    }
  }

  function clearNote(): void {
    note.hidden = true;
    note.textContent = '';
  }

  function degeneracyText(checkA: QuadCheck, checkB: QuadCheck): string {
    const parts: string[] = [];
    if (!checkA.ok) parts.push(`left side: ${checkA.reason}`);
    if (!checkB.ok) parts.push(`right side: ${checkB.reason}`);
    return parts.join('; ');
  }

  function applyHighlights(checkA: QuadCheck, checkB: QuadCheck): void {
    pickerA.highlighted = new Set(checkA.ok ? [] : checkA.offenders);
    pickerB.highlighted = new Set(checkB.ok ? [] : checkB.offenders);
    pickerA.draw();
    pickerB.draw();
  }

  const refresh = () => {
    statusA.textContent = `${pickerA.points.length} of 4 points`;
    statusB.textContent = `${pickerB.points.length} of 4 points`;
    armed = false;
    pickerA.highlighted.clear();
    pickerB.highlighted.clear();
    clearNote();
    const complete = pickerA.points.length === 4 && pickerB.points.length === 4;
    submit.disabled = !complete;
    if (complete) {
      const checkA = checkQuad(pickerA.points);
      const checkB = checkQuad(pickerB.points);
      if (!checkA.ok || !checkB.ok) {
        applyHighlights(checkA, checkB);
        setNote(`Check your picks (${degeneracyText(checkA, checkB)}).`,
                'warn');
      }
    }
    pickerA.draw();
    pickerB.draw();
  };
  pickerA.onChange = refresh;
  pickerB.onChange = refresh;

  async function showPreview(): Promise<void> {
    try {
      const blob = await api.fetchRender(session.projectId, a.id);
      if (previewUrl) URL.revokeObjectURL(previewUrl);
      previewUrl = URL.createObjectURL(blob);
      previewImage.src = previewUrl;
      previewCaption.textContent =
        `Composite centered on ${a.title ?? a.id}, with the new link applied.`;
      preview.hidden = false;
    } catch (err) {
      setNote(`Link created, but the preview failed: ${errorText(err)}`,
              'warn');
    }
  }

  async function submitPayload(payload: api.LinkPayload): Promise<void> {
    submit.disabled = true;
    try {
      await api.createLink(session.projectId, payload);
      setNote('Link created.', 'info');
      await showPreview();
    } catch (err) {
      submit.disabled = false;
      if (err instanceof api.ApiError && err.status === 409 && err.entity) {
        const existing = err.entity;
        setNote(`${err.message}.`, 'error', [{
          label: 'Delete the existing link and resubmit',
          onClick: () => {
            void api.deleteLink(session.projectId, existing)
              .then(() => submitPayload(payload))
              .catch((inner) => setNote(
                `Could not replace the link: ${errorText(inner)}`, 'error'));
          },
        }]);
      } else if (err instanceof api.ApiError && err.status === 422) {
        applyHighlights(checkQuad(payload.quad_a), checkQuad(payload.quad_b));
        setNote(`The server rejected the link: ${err.message}`, 'error');
      } else {
        setNote(`Could not create the link: ${errorText(err)}`, 'error');
      }
    }
  }

  submit.addEventListener('click', () => {
    const checkA = checkQuad(pickerA.points);
    const checkB = checkQuad(pickerB.points);
    if ((!checkA.ok || !checkB.ok) && !armed) {
      armed = true;
      applyHighlights(checkA, checkB);
      setNote(`Check your picks (${degeneracyText(checkA, checkB)}). `
              + 'Submit again to send anyway.', 'warn');
      return;
    }
    void submitPayload({
      a: a.id,
      b: b.id,
      quad_a: pickerA.points.slice(),
      quad_b: pickerB.points.slice(),
    });
  });

  clear.addEventListener('click', () => {
    pickerA.clear();
    pickerB.clear();
  });
  cancel.addEventListener('click', () => session.openGallery());

  refresh();
}
