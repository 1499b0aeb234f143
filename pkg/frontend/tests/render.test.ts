import { beforeEach, describe, expect, it, vi } from "vitest";

import { focusCitation, renderAnswer, renderCitationPanel, renderTranscript } from "../src/render.js";
import { buildViewSession } from "../src/view.js";
import { CITATIONS, PASSAGE_ONE, PASSAGE_TWO, QUERY_RESPONSE, SESSION_RECORD } from "./fixtures.js";

const view = buildViewSession(QUERY_RESPONSE, SESSION_RECORD);

beforeEach(() => {
  document.body.innerHTML = "";
});

describe("renderAnswer", () => {
  it("renders every citation marker as a focusable button", () => {
    const el = renderAnswer(document, view, () => {});
    const buttons = el.querySelectorAll("button.marker");
    expect(buttons).toHaveLength(2);
    for (const button of buttons) {
      expect(button.tagName).toBe("BUTTON"); // natively keyboard-activatable
      expect((button as HTMLButtonElement).tabIndex).toBeGreaterThanOrEqual(0);
    }
    expect(el.textContent).toContain("Sparse retrieval scales");
  });

  it("invokes the marker callback on click", () => {
    const onMarker = vi.fn();
    const el = renderAnswer(document, view, onMarker);
    const second = el.querySelector<HTMLButtonElement>('button[data-marker="2"]');
    second?.click();
    expect(onMarker).toHaveBeenCalledWith(2);
  });
});

describe("renderCitationPanel", () => {
  it("creates one entry per marker with byte-identical passage text", () => {
    const panel = renderCitationPanel(document, CITATIONS);
    const entries = panel.querySelectorAll(".citation-entry");
    expect(entries).toHaveLength(2);
    const texts = panel.querySelectorAll(".passage-text");
    expect(texts[0].textContent).toBe(PASSAGE_ONE);
    expect(texts[1].textContent).toBe(PASSAGE_TWO);
  });

  it("links out only when a url exists", () => {
    const panel = renderCitationPanel(document, CITATIONS);
    const entries = panel.querySelectorAll(".citation-entry");
    expect(entries[0].querySelector("a")?.href).toBe("https://example.org/p1");
    expect(entries[1].querySelector("a")).toBeNull();
  });
});

describe("focusCitation", () => {
  it("activates and focuses the chosen panel entry", () => {
    document.body.appendChild(renderCitationPanel(document, CITATIONS));
    const entry = focusCitation(document, 2);
    expect(entry?.classList.contains("active")).toBe(true);
    expect(document.activeElement).toBe(entry);
    focusCitation(document, 1);
    expect(entry?.classList.contains("active")).toBe(false);
  });

  it("returns null for a marker without an entry", () => {
    document.body.appendChild(renderCitationPanel(document, CITATIONS));
    expect(focusCitation(document, 9)).toBeNull();
  });
});

describe("renderTranscript", () => {
  it("lists y0, the feedback, and each refinement", () => {
    const transcript = renderTranscript(document, view);
    const headings = [...transcript.querySelectorAll("h3")].map((h) => h.textContent);
    expect(headings).toEqual(["Initial draft (y0)", "Self-feedback", "Refinement y1"]);
    const drafts = [...transcript.querySelectorAll(".draft-text")].map((d) => d.textContent);
    expect(drafts).toEqual(view.draftVersions);
    expect(transcript.querySelector(".feedback-list")?.textContent).toContain(
      "cavity cooling",
    );
    expect(transcript.querySelector(".verify-status")?.textContent).toContain("completed");
  });
});
