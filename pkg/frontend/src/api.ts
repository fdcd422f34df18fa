// Typed client for the consultation service. Every request the UI makes
// goes through this class, so the set of methods below is exactly the set
// of routes the client can ever hit.

export interface Hypothesis {
  disease: string;
  score: number;
  matched: number;
  penalty: number;
  confidence: number;
  rank_score: number;
  eliminated: boolean;
  elimination_reason: string | null;
}

export interface ConfirmedSymptom {
  canonical: string;
  strength: number;
  weight: number;
  source: string;
}

export interface DeniedSymptom {
  canonical: string;
  penalty: number;
}

export interface Snapshot {
  phase: string;
  overall_confidence: number;
  questions_asked: number;
  symptoms_confirmed: number;
  symptoms_denied: number;
  hypotheses: Hypothesis[];
  confirmed: ConfirmedSymptom[];
  denied: DeniedSymptom[];
}

export interface Question {
  question_id: string;
  canonical: string;
  prompt_text: string;
  justification: string;
  info_score: number;
}

export interface RiskPrompt {
  question_id: string;
  disease: string;
  description: string;
  prompt_text: string;
}

export interface TestPrompt {
  test_id: string;
  display_name: string;
  unit: string;
  prompt_text: string;
  diseases: string[];
}

export type Next =
  | { kind: "open"; prompt_text: string }
  | { kind: "question"; question: Question }
  | { kind: "test"; test: TestPrompt }
  | { kind: "risk"; risk: RiskPrompt }
  | { kind: "report_ready" };

export interface AppliedPhrase {
  phrase: string;
  canonical: string;
  kind: string;
  contradicted: boolean;
}

export interface ExtractionView {
  raw_phrases: string[];
  confirmed: AppliedPhrase[];
  rejected: string[];
}

export interface TestOutcome {
  disease: string;
  test_id: string;
  value: number | null;
  verdict: "supports" | "refutes" | "skipped";
  decisive_elimination: boolean;
}

export interface StepResponse {
  snapshot: Snapshot;
  next: Next;
  extraction?: ExtractionView | null;
  contradictions?: AppliedPhrase[];
  outcomes?: TestOutcome[];
}

export interface CreateResponse extends StepResponse {
  session_id: string;
  phase: string;
}

export interface Attribution {
  rows: string[];
  columns: string[];
  cells: number[][];
}

export interface RunnerUp {
  disease: string;
  confidence: number;
  rank_score: number;
}

export interface Report {
  most_likely: string | null;
  confidence: number;
  overall_confidence: number;
  runners_up: RunnerUp[];
  supporting_symptoms: { canonical: string; strength: number; weight: number; contribution: number }[];
  denied_exclusions: { canonical: string; penalized: string[] }[];
  test_evidence: TestOutcome[];
  risk_evidence: { disease: string; description: string; weight: number; answer: string }[];
  eliminated: { disease: string; reason: string }[];
  inconclusive: boolean;
  recommended_specialist: string;
  next_steps: string[];
  transcript_digest: string[];
  ranking: Hypothesis[];
}

export interface ReportResponse {
  report: Report;
  text: string;
}

export interface Health {
  status: string;
  kb_diseases: number;
}

/** Error body the service sends for every 4xx/5xx it owns. */
export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    readonly detail: string,
  ) {
    super(`${code}: ${detail}`);
    this.name = "ApiError";
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ServiceClient {
  private base: string;
  private fetchFn: FetchLike;

  constructor(baseUrl: string, fetchFn?: FetchLike) {
    this.base = baseUrl.replace(/\/+$/, "");
    // bind so a bare window.fetch keeps its receiver
    this.fetchFn = fetchFn ?? ((input, init) => fetch(input, init));
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const init: RequestInit = { method };
    if (body !== undefined) {
      init.headers = { "content-type": "application/json" };
      init.body = JSON.stringify(body);
    }
    let resp: Response;
    try {
      resp = await this.fetchFn(this.base + path, init);
    } catch (err) {
      throw new ApiError(0, "unreachable", String(err));
    }
    const raw = await resp.text();
    let parsed: unknown = null;
    try {
      parsed = raw ? JSON.parse(raw) : null;
    } catch {
      parsed = null;
    }
    if (!resp.ok) {
      const e = (parsed ?? {}) as { error?: string; detail?: string };
      throw new ApiError(resp.status, e.error ?? "http_error", e.detail ?? `status ${resp.status}`);
    }
    return parsed as T;
  }

  healthz(): Promise<Health> {
    return this.request("GET", "/healthz");
  }

  createSession(text?: string): Promise<CreateResponse> {
    return this.request("POST", "/api/v1/sessions", text === undefined ? {} : { text });
  }

  message(sessionId: string, text: string): Promise<StepResponse> {
    return this.request("POST", `/api/v1/sessions/${sessionId}/message`, { text });
  }

  answer(sessionId: string, questionId: string, answer: string): Promise<StepResponse> {
    return this.request("POST", `/api/v1/sessions/${sessionId}/answer`, {
      question_id: questionId,
      answer,
    });
  }

  // the value is passed through as typed; the service does the parsing
  testResult(sessionId: string, testId: string, value: string): Promise<StepResponse> {
    return this.request("POST", `/api/v1/sessions/${sessionId}/test-result`, {
      test_id: testId,
      value,
    });
  }

  state(sessionId: string): Promise<StepResponse> {
    return this.request("GET", `/api/v1/sessions/${sessionId}/state`);
  }

  attribution(sessionId: string): Promise<Attribution> {
    return this.request("GET", `/api/v1/sessions/${sessionId}/attribution`);
  }

  report(sessionId: string): Promise<ReportResponse> {
    return this.request("GET", `/api/v1/sessions/${sessionId}/report`);
  }
}
