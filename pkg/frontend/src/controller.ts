// Session state for the page. Holds everything the renderers draw and
// runs every server round-trip. One rule above all others: the numbers
// on screen come from the last server payload, never from arithmetic
// done here.

import {
  ApiError,
  Attribution,
  ConfirmedSymptom,
  DeniedSymptom,
  Hypothesis,
  Next,
  Report,
  ServiceClient,
  StepResponse,
} from "./api.js";

export interface ChatTurn {
  who: "user" | "system";
  text: string;
}

export interface ViewState {
  sessionId: string | null;
  phase: string;
  busy: boolean;
  notice: string | null;
  serviceLine: string;
  chat: ChatTurn[];
  hypotheses: Hypothesis[]; // server order, never re-sorted
  confirmed: ConfirmedSymptom[];
  denied: DeniedSymptom[];
  questionsAsked: number;
  overall: number;
  next: Next | null;
  attribution: Attribution | null;
  report: Report | null;
}

export function promptOf(next: Next | null): string | null {
  if (!next) return null;
  switch (next.kind) {
    case "open":
      return next.prompt_text;
    case "question":
      return next.question.prompt_text;
    case "test":
      return next.test.prompt_text;
    case "risk":
      return next.risk.prompt_text;
    default:
      return null;
  }
}

function freshView(): ViewState {
  return {
    sessionId: null,
    phase: "symptom_elicitation",
    busy: false,
    notice: null,
    serviceLine: "connecting…",
    chat: [],
    hypotheses: [],
    confirmed: [],
    denied: [],
    questionsAsked: 0,
    overall: 0,
    next: null,
    attribution: null,
    report: null,
  };
}

export class ConsultationController {
  readonly view: ViewState = freshView();

  constructor(
    private client: ServiceClient,
    private onChange: (v: ViewState) => void = () => {},
  ) {}

  private emit(): void {
    this.onChange(this.view);
  }

  private say(who: ChatTurn["who"], text: string): void {
    // a resync can re-deliver the outstanding prompt; don't echo it twice
    const last = this.view.chat[this.view.chat.length - 1];
    if (last && last.who === who && last.text === text) return;
    this.view.chat.push({ who, text });
  }

  /** Wrap one user action: busy gate, notice reset, error mapping. */
  private async act(work: () => Promise<void>): Promise<void> {
    if (this.view.busy) return;
    this.view.busy = true;
    this.view.notice = null;
    this.emit();
    try {
      await work();
    } catch (err) {
      await this.fail(err);
    } finally {
      this.view.busy = false;
      this.emit();
    }
  }

  async start(): Promise<void> {
    await this.act(async () => {
      const health = await this.client.healthz();
      this.view.serviceLine = `${health.status} · ${health.kb_diseases} conditions`;
      const created = await this.client.createSession();
      this.view.sessionId = created.session_id;
      this.applyStep(created);
      await this.refreshAttribution();
    });
  }

  async sendText(text: string): Promise<void> {
    const trimmed = text.trim();
    if (!trimmed || !this.view.sessionId) return;
    await this.act(async () => {
      this.say("user", trimmed);
      const out = await this.client.message(this.view.sessionId!, trimmed);
      this.applyStep(out);
      await this.refreshAttribution();
      await this.maybeReport();
    });
  }

  async answer(word: "yes" | "no" | "unsure"): Promise<void> {
    const next = this.view.next;
    if (!this.view.sessionId || !next) return;
    let questionId: string;
    if (next.kind === "question") questionId = next.question.question_id;
    else if (next.kind === "risk") questionId = next.risk.question_id;
    else return;
    await this.act(async () => {
      this.say("user", word);
      const out = await this.client.answer(this.view.sessionId!, questionId, word);
      this.applyStep(out);
      await this.refreshAttribution();
      await this.maybeReport();
    });
  }

  async submitTest(raw: string): Promise<void> {
    const next = this.view.next;
    if (!this.view.sessionId || !next || next.kind !== "test") return;
    const value = raw.trim() === "" ? "unknown" : raw.trim();
    await this.act(async () => {
      this.say("user", value);
      const out = await this.client.testResult(this.view.sessionId!, next.test.test_id, value);
      this.applyStep(out);
      await this.refreshAttribution();
      await this.maybeReport();
    });
  }

  private applyStep(resp: StepResponse): void {
    const snap = resp.snapshot;
    this.view.phase = snap.phase;
    this.view.hypotheses = snap.hypotheses;
    this.view.confirmed = snap.confirmed;
    this.view.denied = snap.denied;
    this.view.questionsAsked = snap.questions_asked;
    this.view.overall = snap.overall_confidence;
    this.view.next = resp.next;

    if (resp.extraction) {
      const noted = resp.extraction.confirmed.map((c) => c.canonical);
      if (noted.length) this.say("system", `Noted: ${noted.join(", ")}.`);
      if (resp.extraction.rejected.length) {
        this.say("system", `Not in my vocabulary: ${resp.extraction.rejected.join(", ")}.`);
      }
    }
    for (const c of resp.contradictions ?? []) {
      this.say("system", `You mentioned ${c.canonical} earlier as absent; keeping the latest answer.`);
    }
    for (const o of resp.outcomes ?? []) {
      if (o.decisive_elimination) {
        this.say("system", `${o.test_id} ruled out ${o.disease}.`);
      }
    }

    const prompt = promptOf(resp.next);
    if (prompt) this.say("system", prompt);
  }

  private async refreshAttribution(): Promise<void> {
    try {
      this.view.attribution = await this.client.attribution(this.view.sessionId!);
    } catch (err) {
      // no evidence yet is a normal pre-conversation state, not an error
      if (err instanceof ApiError && err.code === "empty_evidence") {
        this.view.attribution = null;
        return;
      }
      throw err;
    }
  }

  private async maybeReport(): Promise<void> {
    if (this.view.report || this.view.next?.kind !== "report_ready") return;
    const out = await this.client.report(this.view.sessionId!);
    this.view.report = out.report;
    this.view.phase = "concluded";
    this.say("system", out.text);
  }

  private async fail(err: unknown): Promise<void> {
    if (err instanceof ApiError) {
      this.view.notice = `${err.code}: ${err.detail}`;
      if (err.code === "stale_question") {
        // double-click race: the question moved on under us, pull the
        // server's idea of the session and keep going
        try {
          const cur = await this.client.state(this.view.sessionId!);
          this.applyStep(cur);
        } catch (inner) {
          this.view.notice =
            inner instanceof ApiError ? `${inner.code}: ${inner.detail}` : String(inner);
        }
      }
      return;
    }
    this.view.notice = String(err);
  }
}
