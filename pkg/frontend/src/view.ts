import type {
  AnswerSegment,
  QueryResponse,
  SessionRecord,
  ViewSession,
} from "./types.js";

const MARKER_GROUP = /\[(\d+(?:\s*,\s*\d+)*)\]/g;

/**
 * Combine the query response with the stored transcript. The citation list
 * comes from the response payload untouched so rendered passage strings stay
 * byte-equal to what the service sent.
 */
export function buildViewSession(
  response: QueryResponse,
  record: SessionRecord,
): ViewSession {
  return {
    sessionId: response.session_id,
    question: record.query,
    draftVersions: record.drafts.map((d) => d.text),
    feedback: record.feedback,
    finalAnswer: response.answer,
    citations: response.citations,
    verified: record.verified,
  };
}

/**
 * Split an answer into plain-text and citation-marker segments. Only markers
 * with a panel entry become interactive; anything else stays literal text.
 */
export function splitAnswerByMarkers(
  answer: string,
  knownMarkers: Set<number>,
): AnswerSegment[] {
  const segments: AnswerSegment[] = [];
  let cursor = 0;
  for (const match of answer.matchAll(MARKER_GROUP)) {
    const start = match.index ?? 0;
    const markers = match[1].split(",").map((m) => parseInt(m.trim(), 10));
    if (!markers.every((m) => knownMarkers.has(m))) {
      continue; // leave the whole group as literal text
    }
    if (start > cursor) {
      segments.push({ kind: "text", text: answer.slice(cursor, start) });
    }
    for (const marker of markers) {
      segments.push({ kind: "marker", marker });
    }
    cursor = start + match[0].length;
  }
  if (cursor < answer.length) {
    segments.push({ kind: "text", text: answer.slice(cursor) });
  }
  return segments;
}

export function markersInAnswer(answer: string): number[] {
  const seen = new Set<number>();
  for (const match of answer.matchAll(MARKER_GROUP)) {
    for (const part of match[1].split(",")) {
      seen.add(parseInt(part.trim(), 10));
    }
  }
  return [...seen].sort((a, b) => a - b);
}
