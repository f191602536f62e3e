/**
 * Entry point. The page is configured entirely by query parameters:
 *
 *   ?session=<session_id>        participant mode
 *   ?experiment=<experiment_id>  researcher mode (optional admin token entry)
 *   ?api=<base_url>              service location (default: same origin)
 */

import { SymApi } from "./api.js";
import { ParticipantScreen } from "./participant.js";
import { ResearcherScreen } from "./researcher.js";

function landing(host: HTMLElement): void {
  const box = document.createElement("div");
  box.className = "landing";
  box.innerHTML = `
    <h1>mood spotting</h1>
    <p>Open this page with <code>?session=&lt;id&gt;</code> to participate
       or <code>?experiment=&lt;id&gt;</code> to watch results.</p>
  `;
  host.appendChild(box);
}

export function boot(host: HTMLElement, search: string): void {
  const params = new URLSearchParams(search);
  const api = new SymApi({ baseUrl: params.get("api") ?? "" });

  const sessionId = params.get("session");
  if (sessionId) {
    const screen = new ParticipantScreen({ host, api, sessionId });
    void screen.start().catch((err) => {
      host.appendChild(document.createElement("p")).textContent = String(err);
    });
    return;
  }

  const experimentId = params.get("experiment");
  if (experimentId) {
    const tokenEntry = document.createElement("input");
    tokenEntry.type = "password";
    tokenEntry.className = "admin-token";
    tokenEntry.placeholder = "admin token (optional)";
    tokenEntry.addEventListener("change", () => {
      api.adminToken = tokenEntry.value || undefined;
      void screen.load();
    });
    host.appendChild(tokenEntry);
    const screen = new ResearcherScreen({ host, api, experimentId });
    void screen.load().catch((err) => {
      host.appendChild(document.createElement("p")).textContent = String(err);
    });
    return;
  }

  landing(host);
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  boot(document.getElementById("app")!, window.location.search);
}
