/**
 * Researcher screen: every collected spot of an experiment drawn on one
 * diagram — either as an aggregate cloud or as per-session trajectories
 * ordered by media time. Hovering a marker reveals who placed it and the
 * word they accepted, if any.
 */

import {
  MoodDiagram,
  modelToPixel,
  type PixelSize,
} from "./diagram.js";
import type { CloudPoint, SymApi } from "./api.js";

const SVG_NS = "http://www.w3.org/2000/svg";

export interface ResearcherOptions {
  host: HTMLElement;
  api: SymApi;
  experimentId: string;
  size?: PixelSize;
}

type ViewMode = "cloud" | "trajectories";

export class ResearcherScreen {
  readonly diagram: MoodDiagram;
  mode: ViewMode = "cloud";
  kindFilter: "" | "SELF" | "STIMULUS" = "";
  points: CloudPoint[] = [];

  private readonly api: SymApi;
  private readonly experimentId: string;
  private readonly size: PixelSize;
  private readonly overlay: SVGGElement;
  private readonly emptyState: HTMLDivElement;
  private readonly summary: HTMLParagraphElement;

  constructor(options: ResearcherOptions) {
    this.api = options.api;
    this.experimentId = options.experimentId;
    this.size = options.size ?? { width: 400, height: 400 };

    const root = document.createElement("div");
    root.className = "researcher";

    const controls = document.createElement("div");
    controls.className = "controls";
    for (const mode of ["cloud", "trajectories"] as ViewMode[]) {
      const button = document.createElement("button");
      button.className = `view-${mode}`;
      button.textContent = mode;
      button.addEventListener("click", () => {
        this.mode = mode;
        this.render();
      });
      controls.appendChild(button);
    }
    const filter = document.createElement("select");
    filter.className = "kind-filter";
    for (const [value, label] of [
      ["", "all kinds"],
      ["SELF", "SELF"],
      ["STIMULUS", "STIMULUS"],
    ]) {
      const option = document.createElement("option");
      option.value = value;
      option.textContent = label;
      filter.appendChild(option);
    }
    filter.addEventListener("change", () => {
      this.kindFilter = filter.value as typeof this.kindFilter;
      void this.load();
    });
    controls.appendChild(filter);

    const reload = document.createElement("button");
    reload.className = "reload";
    reload.textContent = "refresh";
    reload.addEventListener("click", () => void this.load());
    controls.appendChild(reload);
    root.appendChild(controls);

    this.diagram = new MoodDiagram(root, { size: this.size });
    this.overlay = document.createElementNS(SVG_NS, "g");
    this.overlay.setAttribute("class", "overlay");
    this.diagram.root.appendChild(this.overlay);

    this.emptyState = document.createElement("div");
    this.emptyState.className = "empty-state";
    this.emptyState.textContent = "no spots collected yet";
    this.emptyState.hidden = true;
    root.appendChild(this.emptyState);

    this.summary = document.createElement("p");
    this.summary.className = "summary";
    root.appendChild(this.summary);

    options.host.appendChild(root);
  }

  /** Fetch the experiment's point cloud under the active filter. */
  async load(): Promise<void> {
    const cloud = await this.api.cloud(
      this.experimentId,
      this.kindFilter ? { kind: this.kindFilter } : {},
    );
    this.points = cloud.points;
    this.render();
  }

  render(): void {
    this.overlay.replaceChildren();
    this.emptyState.hidden = this.points.length > 0;
    this.summary.textContent = `${this.points.length} spots`;
    if (this.points.length === 0) {
      return;
    }
    if (this.mode === "trajectories") {
      this.renderTrajectories();
    }
    for (const point of this.points) {
      this.overlay.appendChild(this.marker(point));
    }
  }

  private marker(point: CloudPoint): SVGCircleElement {
    const { x, y } = modelToPixel(point.point, this.size);
    const circle = document.createElementNS(SVG_NS, "circle");
    circle.setAttribute("class", "cloud-marker");
    circle.setAttribute("cx", String(x));
    circle.setAttribute("cy", String(y));
    circle.setAttribute("r", "4");
    circle.setAttribute("data-kind", point.kind);
    const title = document.createElementNS(SVG_NS, "title");
    title.textContent = point.chosen_term
      ? `${point.participant_pseudonym}: ${point.chosen_term.text}`
      : point.participant_pseudonym;
    circle.appendChild(title);
    return circle;
  }

  private renderTrajectories(): void {
    const bySession = new Map<string, CloudPoint[]>();
    for (const point of this.points) {
      const list = bySession.get(point.session_id) ?? [];
      list.push(point);
      bySession.set(point.session_id, list);
    }
    for (const [sessionId, list] of bySession) {
      if (list.length < 2) {
        continue;
      }
      const ordered = [...list].sort((a, b) => a.t_ms - b.t_ms);
      const line = document.createElementNS(SVG_NS, "polyline");
      line.setAttribute("class", "trajectory");
      line.setAttribute("data-session", sessionId);
      line.setAttribute("fill", "none");
      line.setAttribute(
        "points",
        ordered
          .map((p) => {
            const { x, y } = modelToPixel(p.point, this.size);
            return `${x},${y}`;
          })
          .join(" "),
      );
      this.overlay.appendChild(line);
    }
  }
}
