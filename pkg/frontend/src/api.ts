import type {
  CreateSessionBody,
  FeedbackKind,
  FeedbackResponse,
  RoundPayload,
  SessionMeta,
} from './types.js';

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
    public body: unknown = null,
  ) {
    super(message);
  }
}

async function request<T>(base: string, path: string, init?: RequestInit): Promise<T> {
  const res = await fetch(base + path, {
    headers: { 'Content-Type': 'application/json' },
    ...init,
  });
  let body: any = null;
  try {
    body = await res.json();
  } catch {
    // non-JSON error bodies fall through with body = null
  }
  if (!res.ok) {
    const code = body?.code ?? `HTTP${res.status}`;
    const message = body?.message ?? res.statusText;
    throw new ApiError(res.status, code, message, body);
  }
  return body as T;
}

export class Client {
  constructor(public base: string = '') {}

  createSession(body: CreateSessionBody): Promise<{ id: string; round: RoundPayload }> {
    return request(this.base, '/sessions', { method: 'POST', body: JSON.stringify(body) });
  }

  getRound(sessionId: string): Promise<RoundPayload> {
    return request(this.base, `/sessions/${sessionId}/round`);
  }

  getSession(sessionId: string): Promise<SessionMeta> {
    return request(this.base, `/sessions/${sessionId}`);
  }

  submitFeedback(
    sessionId: string,
    round: number,
    kind: FeedbackKind,
    ranking: number[],
  ): Promise<FeedbackResponse> {
    return request(this.base, `/sessions/${sessionId}/feedback`, {
      method: 'POST',
      body: JSON.stringify({ round, kind, ranking }),
    });
  }
}
