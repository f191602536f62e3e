/**
 * Typed client for the mood service's JSON API.
 *
 * Every mutating call carries an Idempotency-Key header. Commands flagged
 * as queueable survive a dead network: they are kept in order with their
 * original keys and replayed by flush(), so a spot submitted twice lands
 * on the server exactly once.
 */

import type { ModelPoint } from "./diagram.js";

export interface TermView {
  term_id: string;
  text: string;
}

export interface RoundView {
  index: number;
  offered: TermView[];
}

export interface SpotView {
  spot_id: string;
  session_id: string;
  phase: "PRE" | "DURING" | "POST";
  kind: "SELF" | "STIMULUS";
  stimulus_id: string | null;
  point: ModelPoint;
  t_ms: number;
  status: "POINT_ONLY" | "ACCEPTED" | "DECLINED" | "EXHAUSTED";
  chosen_term_id: string | null;
  dictionary_version: number;
}

export interface SpotResponse {
  spot: SpotView;
  round: RoundView | null;
  open: boolean;
}

export interface SessionView {
  session_id: string;
  experiment_id: string;
  participant_pseudonym: string;
  suggestions_enabled: boolean;
  dictionary_id: string;
  dictionary_version: number;
  state: string;
}

export interface SessionDetail {
  session: SessionView;
  spots: Array<
    SpotView & {
      chosen_term_text: string | null;
      open: boolean;
      open_offer: TermView[] | null;
    }
  >;
  markers: Array<{ label: string; t_ms: number }>;
  mood_delta: ModelPoint | null;
}

export interface CloudPoint {
  participant_pseudonym: string;
  session_id: string;
  phase: "PRE" | "DURING" | "POST";
  kind: "SELF" | "STIMULUS";
  stimulus_id: string | null;
  point: ModelPoint;
  t_ms: number;
  chosen_term: TermView | null;
}

export interface Cloud {
  experiment_id: string;
  points: CloudPoint[];
}

export interface SpotRequest {
  phase: "PRE" | "DURING" | "POST";
  kind: "SELF" | "STIMULUS";
  stimulus_id?: string;
  x: number;
  y: number;
  t_ms: number;
}

export type Decision =
  | { decision: "ACCEPT"; term_id: string }
  | { decision: "REFUSE" }
  | { decision: "DECLINE" };

/** The server said no; code mirrors the service's error codes. */
export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
    readonly detail?: unknown,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

/** The network said nothing; the command is queued under its key. */
export class Offline extends Error {
  constructor(readonly key: string) {
    super("network unavailable; command queued");
    this.name = "Offline";
  }
}

export interface QueuedCommand {
  path: string;
  body: unknown;
  key: string;
}

export interface SymApiOptions {
  /** Prefix for every request; empty string means same origin. */
  baseUrl?: string;
  /** Sent as X-Admin-Token when set (researcher mode). */
  adminToken?: string;
  fetchFn?: typeof fetch;
  newKey?: () => string;
}

function defaultKey(): string {
  const c = globalThis.crypto;
  if (c && "randomUUID" in c) {
    return c.randomUUID();
  }
  return `key-${Date.now()}-${Math.random().toString(36).slice(2)}`;
}

export class SymApi {
  readonly queue: QueuedCommand[] = [];
  /** Called once per queued command that flush() lands on the server. */
  onFlushed?: (command: QueuedCommand, response: unknown) => void;

  private readonly baseUrl: string;
  private readonly fetchFn: typeof fetch;
  private readonly newKey: () => string;
  adminToken?: string;

  constructor(options: SymApiOptions = {}) {
    this.baseUrl = options.baseUrl ?? "";
    this.adminToken = options.adminToken;
    this.fetchFn = options.fetchFn ?? fetch.bind(globalThis);
    this.newKey = options.newKey ?? defaultKey;
  }

  private headers(key?: string): Record<string, string> {
    const headers: Record<string, string> = { "Content-Type": "application/json" };
    if (key !== undefined) {
      headers["Idempotency-Key"] = key;
    }
    if (this.adminToken) {
      headers["X-Admin-Token"] = this.adminToken;
    }
    return headers;
  }

  private async parse<T>(response: Response): Promise<T> {
    const body = await response.json().catch(() => null);
    if (!response.ok) {
      const code = body?.code ?? "UNKNOWN";
      const message = body?.message ?? `request failed with status ${response.status}`;
      throw new ApiError(response.status, code, message, body?.detail);
    }
    return body as T;
  }

  /**
   * POST a command. With queueOffline, a network failure stores the
   * command (same body, same key) for flush() and throws Offline.
   */
  async post<T>(
    path: string,
    body: unknown,
    options: { key?: string; queueOffline?: boolean } = {},
  ): Promise<T> {
    const key = options.key ?? this.newKey();
    let response: Response;
    try {
      response = await this.fetchFn(this.baseUrl + path, {
        method: "POST",
        headers: this.headers(key),
        body: JSON.stringify(body),
      });
    } catch (err) {
      if (options.queueOffline) {
        this.queue.push({ path, body, key });
        throw new Offline(key);
      }
      throw err;
    }
    return this.parse<T>(response);
  }

  async get<T>(path: string): Promise<T> {
    const response = await this.fetchFn(this.baseUrl + path, {
      headers: this.headers(),
    });
    return this.parse<T>(response);
  }

  /**
   * Replay queued commands in order with their original keys. Stops at
   * the first network failure (still offline); a server-side rejection
   * drops the command and reports it through onFlushed, because the
   * server has now judged it. Returns how many commands landed.
   */
  async flush(): Promise<number> {
    let flushed = 0;
    while (this.queue.length > 0) {
      const command = this.queue[0];
      let response: unknown;
      try {
        response = await this.post(command.path, command.body, { key: command.key });
      } catch (err) {
        if (err instanceof ApiError) {
          this.queue.shift();
          this.onFlushed?.(command, err);
          continue;
        }
        break;
      }
      this.queue.shift();
      flushed += 1;
      this.onFlushed?.(command, response);
    }
    return flushed;
  }

  // -- command wrappers ----------------------------------------------------

  sessionDetail(sessionId: string): Promise<SessionDetail> {
    return this.get(`/v1/sessions/${encodeURIComponent(sessionId)}`);
  }

  submitSpot(sessionId: string, spot: SpotRequest): Promise<SpotResponse> {
    return this.post(`/v1/sessions/${encodeURIComponent(sessionId)}/spots`, spot, {
      queueOffline: true,
    });
  }

  decide(spotId: string, decision: Decision): Promise<SpotResponse> {
    return this.post(`/v1/spots/${encodeURIComponent(spotId)}/decision`, decision, {
      queueOffline: true,
    });
  }

  addMarker(sessionId: string, label: string, tMs: number): Promise<unknown> {
    return this.post(
      "/v1/markers",
      { session_id: sessionId, label, t_ms: tMs },
      { queueOffline: true },
    );
  }

  cloud(
    experimentId: string,
    filters: { phase?: string; kind?: string } = {},
  ): Promise<Cloud> {
    const query = new URLSearchParams();
    if (filters.phase) {
      query.set("phase", filters.phase);
    }
    if (filters.kind) {
      query.set("kind", filters.kind);
    }
    const suffix = query.toString() ? `?${query}` : "";
    return this.get(`/v1/experiments/${encodeURIComponent(experimentId)}/cloud${suffix}`);
  }
}
