import type { Citation, QueryResponse, SessionRecord } from "../src/types.js";

// deliberately awkward bytes: unicode, newlines, double spaces
export const PASSAGE_ONE =
  "Sparse retrieval at scale\nEvidence block one with  double spaces and é accents.";
export const PASSAGE_TWO =
  "Cavity cooling of nanoparticles\nSecond evidence block\twith a tab and trailing space ";

export const CITATIONS: Citation[] = [
  {
    marker: 1,
    passage_id: "p1:0",
    paper_id: "p1",
    title: "Sparse retrieval at scale",
    passage_text: PASSAGE_ONE,
    url: "https://example.org/p1",
    provenance: "dense",
  },
  {
    marker: 2,
    passage_id: "p2:abs",
    paper_id: "p2",
    title: "Cavity cooling of nanoparticles",
    passage_text: PASSAGE_TWO,
    url: null,
    provenance: "api",
  },
];

export const QUERY_RESPONSE: QueryResponse = {
  session_id: "s1",
  answer:
    "Sparse retrieval scales when paired with reranking [1]. " +
    "A separate literature thread studies cavity cooling [2].",
  citations: CITATIONS,
};

export const SESSION_RECORD: SessionRecord = {
  session_id: "s1",
  query: "how does sparse retrieval scale?",
  drafts: [
    { text: "Initial draft about scaling [1].", marker_map: { "1": "p1:0" } },
    { text: "Refined draft about scaling and cooling [1][2].", marker_map: { "1": "p1:0", "2": "p2:abs" } },
  ],
  feedback: [
    { ordinal: 1, text: "Mention the cavity cooling line of work.", retrieval_query: "cavity cooling" },
  ],
  final: {
    text: QUERY_RESPONSE.answer,
    marker_map: { "1": "p1:0", "2": "p2:abs" },
  },
  citations: CITATIONS,
  verified: true,
  created_at: "2026-08-09T00:00:00Z",
};

export function jsonResponse(status: number, body: unknown): Response {
  return {
    ok: status >= 200 && status < 300,
    status,
    statusText: "",
    json: async () => body,
  } as unknown as Response;
}

export const APP_SKELETON = `
  <form id="ask-form">
    <input id="question" type="text" />
    <button id="submit" type="submit">Ask</button>
  </form>
  <div id="banner" role="alert" hidden></div>
  <button id="tab-answer" type="button" class="active">Answer</button>
  <button id="tab-transcript" type="button">Transcript</button>
  <section id="answer-pane"></section>
  <aside id="citation-pane"></aside>
  <section id="transcript-pane" hidden></section>
`;
