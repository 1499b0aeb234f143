import { ApiClient, ServiceError } from "./api.js";
import { focusCitation, renderAnswer, renderCitationPanel, renderTranscript } from "./render.js";
import type { ViewSession } from "./types.js";
import { buildViewSession } from "./view.js";

interface AppElements {
  form: HTMLFormElement;
  input: HTMLInputElement;
  submit: HTMLButtonElement;
  banner: HTMLElement;
  answerPane: HTMLElement;
  citationPane: HTMLElement;
  transcriptPane: HTMLElement;
  tabAnswer: HTMLButtonElement;
  tabTranscript: HTMLButtonElement;
}

function requireElement<T extends Element>(doc: Document, selector: string): T {
  const el = doc.querySelector<T>(selector);
  if (!el) throw new Error(`missing element ${selector}`);
  return el;
}

export function collectElements(doc: Document): AppElements {
  return {
    form: requireElement<HTMLFormElement>(doc, "#ask-form"),
    input: requireElement<HTMLInputElement>(doc, "#question"),
    submit: requireElement<HTMLButtonElement>(doc, "#submit"),
    banner: requireElement<HTMLElement>(doc, "#banner"),
    answerPane: requireElement<HTMLElement>(doc, "#answer-pane"),
    citationPane: requireElement<HTMLElement>(doc, "#citation-pane"),
    transcriptPane: requireElement<HTMLElement>(doc, "#transcript-pane"),
    tabAnswer: requireElement<HTMLButtonElement>(doc, "#tab-answer"),
    tabTranscript: requireElement<HTMLButtonElement>(doc, "#tab-transcript"),
  };
}

export class App {
  private inFlight = false;
  private readonly doc: Document;

  constructor(
    private readonly els: AppElements,
    private readonly api: ApiClient,
  ) {
    this.doc = els.form.ownerDocument;
    els.form.addEventListener("submit", (event) => {
      event.preventDefault();
      void this.submitQuery(els.input.value);
    });
    els.tabAnswer.addEventListener("click", () => this.showTab("answer"));
    els.tabTranscript.addEventListener("click", () => this.showTab("transcript"));
  }

  get busy(): boolean {
    return this.inFlight;
  }

  showTab(which: "answer" | "transcript"): void {
    const answer = which === "answer";
    this.els.answerPane.hidden = !answer;
    this.els.citationPane.hidden = !answer;
    this.els.transcriptPane.hidden = answer;
    this.els.tabAnswer.classList.toggle("active", answer);
    this.els.tabTranscript.classList.toggle("active", !answer);
  }

  setBanner(message: string | null): void {
    this.els.banner.textContent = message ?? "";
    this.els.banner.hidden = message === null;
  }

  /** One query per tab at a time; each submission starts a fresh session. */
  async submitQuery(question: string): Promise<ViewSession | null> {
    if (this.inFlight) return null;
    const trimmed = question.trim();
    if (!trimmed) {
      this.setBanner("Enter a question first.");
      return null;
    }
    this.inFlight = true;
    this.els.submit.disabled = true;
    this.setBanner(null);
    try {
      const response = await this.api.postQuery(trimmed);
      const record = await this.api.getSession(response.session_id);
      const view = buildViewSession(response, record);
      this.renderView(view);
      return view;
    } catch (error) {
      if (error instanceof ServiceError) {
        this.setBanner(
          error.retriable
            ? `Service unavailable (${error.status}): ${error.message}. Try again.`
            : `Request rejected (${error.status}): ${error.message}`,
        );
      } else {
        this.setBanner(`Unexpected error: ${String(error)}. Try again.`);
      }
      return null; // input stays as typed so the user can retry
    } finally {
      this.inFlight = false;
      this.els.submit.disabled = false;
    }
  }

  private renderView(view: ViewSession): void {
    this.els.answerPane.replaceChildren(
      renderAnswer(this.doc, view, (marker) => {
        focusCitation(this.doc, marker);
      }),
    );
    this.els.citationPane.replaceChildren(renderCitationPanel(this.doc, view.citations));
    this.els.transcriptPane.replaceChildren(renderTranscript(this.doc, view));
    this.showTab("answer");
  }
}

export function bootstrap(doc: Document): App {
  const apiBase = new URLSearchParams(doc.defaultView?.location.search ?? "").get("api") ?? "";
  return new App(collectElements(doc), new ApiClient(apiBase));
}

if (typeof document !== "undefined" && document.readyState !== "loading") {
  if (document.querySelector("#ask-form")) bootstrap(document);
} else if (typeof document !== "undefined") {
  document.addEventListener("DOMContentLoaded", () => {
    if (document.querySelector("#ask-form")) bootstrap(document);
  });
}
