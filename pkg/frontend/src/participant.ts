/**
 * Participant screen: tap the diagram to spot a mood, then decide on the
 * words the server offers — accept one, ask for others, or skip.
 *
 * The screen itself stays free of mood vocabulary; the only mood words a
 * participant ever sees are the server-offered chips and the words they
 * accepted onto their own trace.
 */

import { MoodDiagram, type ModelPoint, type PixelSize } from "./diagram.js";
import {
  ApiError,
  Offline,
  type QueuedCommand,
  type RoundView,
  type SpotResponse,
  type SymApi,
} from "./api.js";

type Phase = "PRE" | "DURING" | "POST";
type Kind = "SELF" | "STIMULUS";

export interface ParticipantOptions {
  host: HTMLElement;
  api: SymApi;
  sessionId: string;
  size?: PixelSize;
  /** Session-relative clock in ms; used as t_ms for submitted spots. */
  clock?: () => number;
}

const PHASE_LABELS: Record<Phase, string> = {
  PRE: "before",
  DURING: "while listening",
  POST: "after",
};

export class ParticipantScreen {
  readonly diagram: MoodDiagram;
  phase: Phase = "PRE";
  kind: Kind = "SELF";

  private readonly api: SymApi;
  private readonly sessionId: string;
  private readonly clock: () => number;
  private readonly root: HTMLDivElement;
  private readonly duringControls: HTMLDivElement;
  private readonly stimulusInput: HTMLInputElement;
  private readonly chipBar: HTMLDivElement;
  private readonly status: HTMLParagraphElement;
  private readonly traceGroups = new Map<string, SVGGElement>();
  private readonly offeredText = new Map<string, string>();
  private openSpotId: string | null = null;

  constructor(options: ParticipantOptions) {
    this.api = options.api;
    this.sessionId = options.sessionId;
    const t0 = Date.now();
    this.clock = options.clock ?? (() => Date.now() - t0);

    this.root = document.createElement("div");
    this.root.className = "participant";

    const phaseBar = document.createElement("nav");
    phaseBar.className = "phase-bar";
    for (const phase of ["PRE", "DURING", "POST"] as Phase[]) {
      const button = document.createElement("button");
      button.dataset.phase = phase;
      button.textContent = PHASE_LABELS[phase];
      button.addEventListener("click", () => this.setPhase(phase));
      phaseBar.appendChild(button);
    }
    this.root.appendChild(phaseBar);

    this.duringControls = document.createElement("div");
    this.duringControls.className = "during-controls";
    this.duringControls.hidden = true;
    for (const [kind, label] of [
      ["SELF", "myself"],
      ["STIMULUS", "the music"],
    ] as Array<[Kind, string]>) {
      const wrap = document.createElement("label");
      const radio = document.createElement("input");
      radio.type = "radio";
      radio.name = "kind";
      radio.value = kind;
      radio.checked = kind === "SELF";
      radio.addEventListener("change", () => {
        this.kind = kind;
        this.stimulusInput.hidden = kind !== "STIMULUS";
      });
      wrap.appendChild(radio);
      wrap.appendChild(document.createTextNode(label));
      this.duringControls.appendChild(wrap);
    }
    this.stimulusInput = document.createElement("input");
    this.stimulusInput.className = "stimulus-id";
    this.stimulusInput.placeholder = "track";
    this.stimulusInput.hidden = true;
    this.duringControls.appendChild(this.stimulusInput);
    this.root.appendChild(this.duringControls);

    this.diagram = new MoodDiagram(this.root, {
      size: options.size ?? { width: 400, height: 400 },
      onSpot: (point) => void this.submit(point),
    });

    this.chipBar = document.createElement("div");
    this.chipBar.className = "chip-bar";
    this.chipBar.hidden = true;
    this.root.appendChild(this.chipBar);

    this.status = document.createElement("p");
    this.status.className = "status";
    this.status.setAttribute("role", "status");
    this.root.appendChild(this.status);

    options.host.appendChild(this.root);
    this.setPhase("PRE");

    this.api.onFlushed = (command, response) => this.applyFlushed(command, response);
    window.addEventListener("online", () => void this.api.flush());
  }

  /** Load existing session state and replay it onto the screen. */
  async start(): Promise<void> {
    const detail = await this.api.sessionDetail(this.sessionId);
    for (const spot of detail.spots) {
      const group = this.diagram.confirmSpot(spot.point);
      this.traceGroups.set(spot.spot_id, group);
      if (spot.chosen_term_text) {
        this.diagram.labelSpot(group, spot.chosen_term_text);
      }
      if (spot.open && spot.open_offer) {
        this.renderChips(spot.spot_id, { index: -1, offered: spot.open_offer });
      }
    }
    const next: Record<string, Phase> = {
      CREATED: "PRE",
      PRE_DONE: "DURING",
      RUNNING: "DURING",
      POST_DONE: "POST",
    };
    this.setPhase(next[detail.session.state] ?? "PRE");
    if (detail.session.state === "POST_DONE") {
      this.say("all done — thank you");
    }
  }

  setPhase(phase: Phase): void {
    this.phase = phase;
    this.duringControls.hidden = phase !== "DURING";
    if (phase !== "DURING") {
      this.kind = "SELF";
    }
    for (const button of this.root.querySelectorAll<HTMLButtonElement>("[data-phase]")) {
      button.classList.toggle("active", button.dataset.phase === phase);
    }
  }

  private say(message: string): void {
    this.status.textContent = message;
  }

  private async submit(point: ModelPoint): Promise<void> {
    this.hideChips();
    this.diagram.markPending(point);
    this.say("sending…");
    const request = {
      phase: this.phase,
      kind: this.phase === "DURING" ? this.kind : ("SELF" as Kind),
      x: point.valence,
      y: point.arousal,
      t_ms: Math.max(0, Math.round(this.clock())),
      ...(this.phase === "DURING" &&
      this.kind === "STIMULUS" &&
      this.stimulusInput.value
        ? { stimulus_id: this.stimulusInput.value }
        : {}),
    };
    try {
      this.applySpotResponse(await this.api.submitSpot(this.sessionId, request));
    } catch (err) {
      if (err instanceof Offline) {
        this.say("saved locally — will send when the connection returns");
        return;
      }
      this.diagram.clearPending();
      if (err instanceof ApiError) {
        this.say(err.message);
        return;
      }
      throw err;
    }
  }

  private applySpotResponse(response: SpotResponse): void {
    // The server-confirmed point is what lands on the trace.
    const group = this.diagram.confirmSpot(response.spot.point);
    this.traceGroups.set(response.spot.spot_id, group);
    this.say("");
    if (response.round) {
      this.renderChips(response.spot.spot_id, response.round);
    }
  }

  private renderChips(spotId: string, round: RoundView): void {
    this.openSpotId = spotId;
    this.chipBar.replaceChildren();
    for (const term of round.offered) {
      this.offeredText.set(term.term_id, term.text);
      const chip = document.createElement("button");
      chip.className = "chip";
      chip.dataset.term = term.term_id;
      chip.textContent = term.text;
      chip.addEventListener("click", () =>
        void this.decide({ decision: "ACCEPT", term_id: term.term_id }),
      );
      this.chipBar.appendChild(chip);
    }
    const refuse = document.createElement("button");
    refuse.className = "refuse";
    refuse.textContent = "none of these";
    refuse.addEventListener("click", () => void this.decide({ decision: "REFUSE" }));
    this.chipBar.appendChild(refuse);

    const decline = document.createElement("button");
    decline.className = "decline";
    decline.textContent = "skip";
    decline.addEventListener("click", () => void this.decide({ decision: "DECLINE" }));
    this.chipBar.appendChild(decline);

    this.chipBar.hidden = false;
  }

  private hideChips(): void {
    this.chipBar.hidden = true;
    this.chipBar.replaceChildren();
    this.openSpotId = null;
  }

  private setChipsEnabled(enabled: boolean): void {
    for (const button of this.chipBar.querySelectorAll("button")) {
      button.disabled = !enabled;
    }
  }

  private async decide(
    decision: { decision: "ACCEPT"; term_id: string } | { decision: "REFUSE" | "DECLINE" },
  ): Promise<void> {
    if (this.openSpotId === null) {
      return;
    }
    const spotId = this.openSpotId;
    this.setChipsEnabled(false);
    try {
      this.applyDecisionResponse(await this.api.decide(spotId, decision));
    } catch (err) {
      if (err instanceof Offline) {
        this.say("saved locally — will send when the connection returns");
        return;
      }
      if (err instanceof ApiError && err.code === "CONFLICT") {
        this.hideChips();
        this.say("");
        return;
      }
      this.setChipsEnabled(true);
      if (err instanceof ApiError) {
        this.say(err.message);
        return;
      }
      throw err;
    }
  }

  private applyDecisionResponse(response: SpotResponse): void {
    const spot = response.spot;
    if (spot.status === "ACCEPTED" && spot.chosen_term_id) {
      const group = this.traceGroups.get(spot.spot_id);
      const word = this.offeredText.get(spot.chosen_term_id);
      if (group && word) {
        this.diagram.labelSpot(group, word);
      }
      this.hideChips();
      this.say("");
    } else if (response.round) {
      this.renderChips(spot.spot_id, response.round);
    } else {
      // DECLINED or EXHAUSTED: the spot stays point-only.
      this.hideChips();
      this.say("");
    }
  }

  private applyFlushed(command: QueuedCommand, response: unknown): void {
    if (response instanceof ApiError) {
      this.say(response.message);
      return;
    }
    if (command.path.endsWith("/spots")) {
      this.applySpotResponse(response as SpotResponse);
    } else if (command.path.endsWith("/decision")) {
      this.applyDecisionResponse(response as SpotResponse);
    }
  }
}
