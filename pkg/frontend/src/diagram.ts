/**
 * The mood diagram: a square valence-arousal plane the participant taps.
 *
 * Valence runs along the horizontal axis, arousal along the vertical one,
 * arousal increasing upward (screen y is inverted). The corners of the
 * drawing surface are the corners of the model square [-100, 100]².
 *
 * Participant mode carries no words at all — the four extrema are marked
 * with smiley glyphs so the axes never verbally prime a mood.
 */

export const AXIS_MIN = -100;
export const AXIS_MAX = 100;
const SPAN = AXIS_MAX - AXIS_MIN;

export interface ModelPoint {
  valence: number;
  arousal: number;
}

export interface PixelPoint {
  x: number;
  y: number;
}

export interface PixelSize {
  width: number;
  height: number;
}

function clampAxis(value: number): number {
  return Math.max(AXIS_MIN, Math.min(AXIS_MAX, value));
}

function roundHalfAway(value: number): number {
  return value < 0 ? -Math.round(-value) : Math.round(value);
}

/** Convert a position on the drawing surface to model coordinates. */
export function pixelToModel(px: PixelPoint, size: PixelSize): ModelPoint {
  const valence = roundHalfAway((px.x / size.width) * SPAN + AXIS_MIN);
  const arousal = roundHalfAway(AXIS_MAX - (px.y / size.height) * SPAN);
  return { valence: clampAxis(valence), arousal: clampAxis(arousal) };
}

/** Convert model coordinates to a position on the drawing surface. */
export function modelToPixel(point: ModelPoint, size: PixelSize): PixelPoint {
  return {
    x: ((point.valence - AXIS_MIN) / SPAN) * size.width,
    y: ((AXIS_MAX - point.arousal) / SPAN) * size.height,
  };
}

/** True when the position lies on the diagram (edges included). */
export function insideDiagram(px: PixelPoint, size: PixelSize): boolean {
  return px.x >= 0 && px.x <= size.width && px.y >= 0 && px.y <= size.height;
}

const SVG_NS = "http://www.w3.org/2000/svg";

function el<K extends keyof SVGElementTagNameMap>(
  tag: K,
  attrs: Record<string, string | number> = {},
): SVGElementTagNameMap[K] {
  const node = document.createElementNS(SVG_NS, tag);
  for (const [name, value] of Object.entries(attrs)) {
    node.setAttribute(name, String(value));
  }
  return node;
}

/**
 * One smiley glyph: face circle, two eyes, and a mouth that carries the
 * expression. Pure geometry, no text. The artwork is a placeholder — the
 * glyph set is an experimental variable, not a fixed asset.
 */
function smiley(expression: "pleased" | "displeased" | "awake" | "sleepy", r: number) {
  const g = el("g", { class: "smiley", "data-glyph": expression });
  g.appendChild(el("circle", { cx: 0, cy: 0, r, fill: "none", "stroke-width": 1.5 }));
  const eyeY = -r * 0.25;
  const eyeDX = r * 0.35;
  if (expression === "sleepy") {
    for (const side of [-1, 1]) {
      g.appendChild(
        el("path", {
          d: `M ${side * eyeDX - r * 0.15} ${eyeY} h ${r * 0.3}`,
          fill: "none",
          "stroke-width": 1.5,
        }),
      );
    }
  } else {
    const eyeR = expression === "awake" ? r * 0.14 : r * 0.1;
    for (const side of [-1, 1]) {
      g.appendChild(el("circle", { cx: side * eyeDX, cy: eyeY, r: eyeR }));
    }
  }
  const mouthY = r * 0.35;
  const mouth: Record<typeof expression, string> = {
    pleased: `M ${-r * 0.4} ${mouthY - r * 0.1} Q 0 ${mouthY + r * 0.4} ${r * 0.4} ${mouthY - r * 0.1}`,
    displeased: `M ${-r * 0.4} ${mouthY + r * 0.25} Q 0 ${mouthY - r * 0.3} ${r * 0.4} ${mouthY + r * 0.25}`,
    awake: `M ${-r * 0.25} ${mouthY} a ${r * 0.25} ${r * 0.25} 0 1 0 ${r * 0.5} 0 a ${r * 0.25} ${r * 0.25} 0 1 0 ${-r * 0.5} 0`,
    sleepy: `M ${-r * 0.3} ${mouthY} h ${r * 0.6}`,
  };
  g.appendChild(el("path", { d: mouth[expression], fill: "none", "stroke-width": 1.5 }));
  return g;
}

export interface DiagramOptions {
  size: PixelSize;
  /** Called with model coordinates when the participant taps the plane. */
  onSpot?: (point: ModelPoint) => void;
}

/**
 * The interactive diagram. Taps inside the plane become model points;
 * everything else is ignored. Confirmed spots and their accepted words
 * accumulate on the participant's own trace.
 */
export class MoodDiagram {
  readonly root: SVGSVGElement;
  readonly size: PixelSize;
  private readonly trace: SVGGElement;
  private pending: SVGCircleElement | null = null;

  constructor(host: HTMLElement, options: DiagramOptions) {
    this.size = options.size;
    const { width, height } = this.size;
    this.root = el("svg", {
      class: "mood-diagram",
      viewBox: `0 0 ${width} ${height}`,
      width,
      height,
    });

    this.root.appendChild(
      el("rect", { class: "frame", x: 0, y: 0, width, height, fill: "none" }),
    );
    this.root.appendChild(
      el("line", { class: "axis", x1: 0, y1: height / 2, x2: width, y2: height / 2 }),
    );
    this.root.appendChild(
      el("line", { class: "axis", x1: width / 2, y1: 0, x2: width / 2, y2: height }),
    );

    // Glyphs at the four extrema, inset so they stay on the surface.
    const r = Math.min(width, height) * 0.045;
    const inset = r * 1.6;
    const anchors: Array<[Parameters<typeof smiley>[0], number, number]> = [
      ["pleased", width - inset, height / 2],
      ["displeased", inset, height / 2],
      ["awake", width / 2, inset],
      ["sleepy", width / 2, height - inset],
    ];
    for (const [expression, cx, cy] of anchors) {
      const glyph = smiley(expression, r);
      glyph.setAttribute("transform", `translate(${cx} ${cy})`);
      this.root.appendChild(glyph);
    }

    this.trace = el("g", { class: "trace" });
    this.root.appendChild(this.trace);

    this.root.addEventListener("pointerdown", (event) => {
      const point = this.eventToModel(event as MouseEvent);
      if (point !== null) {
        options.onSpot?.(point);
      }
    });

    host.appendChild(this.root);
  }

  /** Map a pointer event to model coordinates; null when off the plane. */
  eventToModel(event: MouseEvent): ModelPoint | null {
    const rect = this.root.getBoundingClientRect();
    // Scale from CSS pixels to the logical drawing surface (HiDPI, CSS
    // resizing); a zero rect means layout hasn't happened — assume 1:1.
    const sx = rect.width > 0 ? this.size.width / rect.width : 1;
    const sy = rect.height > 0 ? this.size.height / rect.height : 1;
    const px = {
      x: (event.clientX - rect.left) * sx,
      y: (event.clientY - rect.top) * sy,
    };
    if (!insideDiagram(px, this.size)) {
      return null;
    }
    return pixelToModel(px, this.size);
  }

  /** Show a provisional marker while the spot is in flight. */
  markPending(point: ModelPoint): void {
    this.clearPending();
    const { x, y } = modelToPixel(point, this.size);
    this.pending = el("circle", { class: "pending-spot", cx: x, cy: y, r: 5 });
    this.root.appendChild(this.pending);
  }

  clearPending(): void {
    this.pending?.remove();
    this.pending = null;
  }

  /** Draw a confirmed spot on the trace and return its group. */
  confirmSpot(point: ModelPoint): SVGGElement {
    this.clearPending();
    const { x, y } = modelToPixel(point, this.size);
    const group = el("g", { class: "trace-spot", transform: `translate(${x} ${y})` });
    group.appendChild(el("circle", { cx: 0, cy: 0, r: 4 }));
    this.trace.appendChild(group);
    return group;
  }

  /** Render an accepted word next to its spot on the trace. */
  labelSpot(group: SVGGElement, word: string): void {
    const label = el("text", { class: "trace-word", x: 7, y: -7 });
    label.textContent = word;
    group.appendChild(label);
  }
}
