import type { Citation, SessionFeedback, ViewSession } from "./types.js";
import { splitAnswerByMarkers } from "./view.js";

/** Answer text with each resolvable citation marker as a focusable button. */
export function renderAnswer(
  doc: Document,
  view: ViewSession,
  onMarker: (marker: number) => void,
): HTMLElement {
  const container = doc.createElement("div");
  container.className = "answer";
  const known = new Set(view.citations.map((c) => c.marker));
  for (const segment of splitAnswerByMarkers(view.finalAnswer, known)) {
    if (segment.kind === "text") {
      container.appendChild(doc.createTextNode(segment.text));
    } else {
      const button = doc.createElement("button");
      button.type = "button";
      button.className = "marker";
      button.dataset.marker = String(segment.marker);
      button.textContent = `[${segment.marker}]`;
      button.setAttribute("aria-label", `show citation ${segment.marker}`);
      button.addEventListener("click", () => onMarker(segment.marker));
      container.appendChild(button);
    }
  }
  return container;
}

/** Citation panel, one entry per marker; passage text inserted byte-for-byte. */
export function renderCitationPanel(doc: Document, citations: Citation[]): HTMLElement {
  const panel = doc.createElement("section");
  panel.className = "citation-panel";
  for (const citation of citations) {
    const entry = doc.createElement("article");
    entry.className = "citation-entry";
    entry.id = `citation-${citation.marker}`;
    entry.tabIndex = -1;

    const heading = doc.createElement("h3");
    heading.textContent = `[${citation.marker}] ${citation.title}`;
    entry.appendChild(heading);

    const passage = doc.createElement("pre");
    passage.className = "passage-text";
    passage.textContent = citation.passage_text;
    entry.appendChild(passage);

    const meta = doc.createElement("p");
    meta.className = "citation-meta";
    meta.textContent = `source: ${citation.provenance}`;
    entry.appendChild(meta);

    if (citation.url) {
      const link = doc.createElement("a");
      link.href = citation.url;
      link.textContent = citation.url;
      link.target = "_blank";
      link.rel = "noreferrer";
      entry.appendChild(link);
    }
    panel.appendChild(entry);
  }
  return panel;
}

/** Scroll/focus the panel entry for one marker and highlight it. */
export function focusCitation(doc: Document, marker: number): HTMLElement | null {
  const entry = doc.getElementById(`citation-${marker}`);
  if (!entry) return null;
  for (const active of doc.querySelectorAll(".citation-entry.active")) {
    active.classList.remove("active");
  }
  entry.classList.add("active");
  if (typeof entry.scrollIntoView === "function") {
    entry.scrollIntoView({ block: "nearest" });
  }
  (entry as HTMLElement).focus();
  return entry as HTMLElement;
}

function feedbackList(doc: Document, items: SessionFeedback[]): HTMLElement {
  const list = doc.createElement("ol");
  list.className = "feedback-list";
  for (const item of items) {
    const li = doc.createElement("li");
    li.textContent = item.retrieval_query
      ? `${item.text} (retrieved: ${item.retrieval_query})`
      : item.text;
    list.appendChild(li);
  }
  return list;
}

/** Draft-by-draft transcript: y0, the feedback, and each refinement. */
export function renderTranscript(doc: Document, view: ViewSession): HTMLElement {
  const container = doc.createElement("div");
  container.className = "transcript";

  view.draftVersions.forEach((text, index) => {
    const section = doc.createElement("section");
    section.className = "draft";
    const heading = doc.createElement("h3");
    heading.textContent = index === 0 ? "Initial draft (y0)" : `Refinement y${index}`;
    section.appendChild(heading);
    const body = doc.createElement("pre");
    body.className = "draft-text";
    body.textContent = text;
    section.appendChild(body);
    container.appendChild(section);

    if (index === 0 && view.feedback.length > 0) {
      const feedback = doc.createElement("section");
      feedback.className = "feedback";
      const fbHeading = doc.createElement("h3");
      fbHeading.textContent = "Self-feedback";
      feedback.appendChild(fbHeading);
      feedback.appendChild(feedbackList(doc, view.feedback));
      container.appendChild(feedback);
    }
  });

  const status = doc.createElement("p");
  status.className = "verify-status";
  status.textContent = view.verified
    ? "Citation verification: completed"
    : "Citation verification: skipped (backend failure)";
  container.appendChild(status);
  return container;
}
