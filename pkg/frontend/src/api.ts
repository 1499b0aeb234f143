import type { QueryResponse, SessionRecord } from "./types.js";

export class ServiceError extends Error {
  constructor(
    public readonly status: number,
    message: string,
  ) {
    super(message);
    this.name = "ServiceError";
  }

  get retriable(): boolean {
    return this.status >= 500;
  }
}

async function errorDetail(response: Response): Promise<string> {
  try {
    const body = await response.json();
    if (body && typeof body.detail === "string") return body.detail;
    return JSON.stringify(body);
  } catch {
    return response.statusText || `HTTP ${response.status}`;
  }
}

export class ApiClient {
  constructor(private readonly baseUrl: string = "") {}

  private url(path: string): string {
    return `${this.baseUrl.replace(/\/$/, "")}${path}`;
  }

  async postQuery(question: string): Promise<QueryResponse> {
    const response = await fetch(this.url("/v1/query"), {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ question }),
    });
    if (!response.ok) {
      throw new ServiceError(response.status, await errorDetail(response));
    }
    return (await response.json()) as QueryResponse;
  }

  async getSession(sessionId: string): Promise<SessionRecord> {
    const response = await fetch(this.url(`/v1/sessions/${sessionId}`));
    if (!response.ok) {
      throw new ServiceError(response.status, await errorDetail(response));
    }
    return (await response.json()) as SessionRecord;
  }

  async health(): Promise<{ status: string }> {
    const response = await fetch(this.url("/v1/health"));
    if (!response.ok) {
      throw new ServiceError(response.status, await errorDetail(response));
    }
    return (await response.json()) as { status: string };
  }
}
