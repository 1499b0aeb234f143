export interface Citation {
  marker: number;
  passage_id: string;
  paper_id: string;
  title: string;
  passage_text: string;
  url: string | null;
  provenance: string;
}

export interface QueryResponse {
  session_id: string;
  answer: string;
  citations: Citation[];
}

export interface SessionDraft {
  text: string;
  marker_map: Record<string, string>;
}

export interface SessionFeedback {
  ordinal: number;
  text: string;
  retrieval_query: string | null;
}

export interface SessionRecord {
  session_id: string;
  query: string;
  drafts: SessionDraft[];
  feedback: SessionFeedback[];
  final: SessionDraft;
  citations: Citation[];
  verified: boolean;
  created_at: string;
}

/** Everything the console renders for one completed query. */
export interface ViewSession {
  sessionId: string;
  question: string;
  draftVersions: string[];
  feedback: SessionFeedback[];
  finalAnswer: string;
  citations: Citation[];
  verified: boolean;
}

export type AnswerSegment =
  | { kind: "text"; text: string }
  | { kind: "marker"; marker: number };
