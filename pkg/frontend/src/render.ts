// HTML renderers. Pure string-in string-out so the test suite can check
// them without a browser. Nothing in here computes a diagnostic value:
// bar widths and cell colors are geometry around numbers the server sent.

import { Attribution, Hypothesis, Next, Report } from "./api.js";
import { ChatTurn, ViewState } from "./controller.js";

export const NEUTRAL_CELL = "#ececec";

// the service caps per-disease confidence at 0.95, so that is full scale
const CONFIDENCE_CAP = 0.95;

export function escapeHtml(s: string): string {
  return s
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;")
    .replace(/'/g, "&#39;");
}

/** Bar geometry for a confidence value, as a percentage of full scale. */
export function barWidth(confidence: number): number {
  const clamped = Math.min(Math.max(confidence, 0), CONFIDENCE_CAP);
  return (clamped / CONFIDENCE_CAP) * 100;
}

/**
 * Cell color for a signed contribution: warm for support, cool for a
 * penalty, neutral for no contribution. Darker means stronger, scaled
 * against the largest magnitude in the matrix.
 */
export function heatColor(value: number, maxAbs: number): string {
  if (value === 0 || maxAbs <= 0) return NEUTRAL_CELL;
  const t = Math.min(Math.abs(value) / maxAbs, 1);
  const lightness = 94 - Math.round(46 * t);
  const hue = value > 0 ? 6 : 214;
  return `hsl(${hue}, 70%, ${lightness}%)`;
}

const PHASE_LABELS: Record<string, string> = {
  symptom_elicitation: "Symptom elicitation",
  test_evaluation: "Test evaluation",
  concluded: "Concluded",
};

export function renderPhaseBadge(phase: string): string {
  const label = PHASE_LABELS[phase] ?? phase;
  return `<span class="badge phase-${escapeHtml(phase)}">${escapeHtml(label)}</span>`;
}

export function renderChat(chat: ChatTurn[]): string {
  return chat
    .map((t) => `<div class="msg ${t.who}">${escapeHtml(t.text)}</div>`)
    .join("");
}

/** Hypothesis rows in exactly the order given; rank is the position. */
export function renderHypotheses(hypotheses: Hypothesis[]): string {
  if (!hypotheses.length) return `<div class="empty">No candidates yet.</div>`;
  return hypotheses
    .map((h, i) => {
      const name = escapeHtml(h.disease);
      if (h.eliminated) {
        const reason = escapeHtml(h.elimination_reason ?? "eliminated");
        return (
          `<div class="hyp eliminated" data-disease="${name}">` +
          `<span class="rank">${i + 1}</span>` +
          `<span class="name">${name}</span>` +
          `<span class="why">${reason}</span></div>`
        );
      }
      const width = barWidth(h.confidence).toFixed(1);
      return (
        `<div class="hyp" data-disease="${name}">` +
        `<span class="rank">${i + 1}</span>` +
        `<span class="name">${name}</span>` +
        `<span class="bar"><span class="fill" style="width:${width}%"></span></span>` +
        `<span class="num">${h.confidence.toFixed(3)}</span></div>`
      );
    })
    .join("");
}

export function renderQuestionCard(next: Next | null): string {
  if (!next) return "";
  switch (next.kind) {
    case "open":
      return `<p class="prompt">${escapeHtml(next.prompt_text)}</p>`;
    case "question": {
      const q = next.question;
      return (
        `<p class="prompt">${escapeHtml(q.prompt_text)}</p>` +
        `<p class="just">${escapeHtml(q.justification)}</p>`
      );
    }
    case "test": {
      const t = next.test;
      const unit = t.unit ? ` <span class="unit">(${escapeHtml(t.unit)})</span>` : "";
      return (
        `<p class="prompt">${escapeHtml(t.prompt_text)}${unit}</p>` +
        `<p class="just">Relevant to: ${escapeHtml(t.diseases.join(", "))}</p>`
      );
    }
    case "risk": {
      const r = next.risk;
      return (
        `<p class="prompt">${escapeHtml(r.prompt_text)}</p>` +
        `<p class="just">Risk factor for ${escapeHtml(r.disease)}</p>`
      );
    }
    default:
      return `<p class="prompt">The report is ready below.</p>`;
  }
}

export function renderAttribution(attr: Attribution | null): string {
  if (!attr || !attr.rows.length) {
    return `<div class="empty">No evidence recorded yet.</div>`;
  }
  let maxAbs = 0;
  for (const row of attr.cells) {
    for (const v of row) maxAbs = Math.max(maxAbs, Math.abs(v));
  }
  const head =
    `<tr><th></th>` +
    attr.columns.map((c) => `<th scope="col">${escapeHtml(c)}</th>`).join("") +
    `</tr>`;
  const body = attr.rows
    .map((label, i) => {
      const cells = attr.cells[i]
        .map((v, j) => {
          const color = heatColor(v, maxAbs);
          const title = `${label} → ${attr.columns[j]}: ${v >= 0 ? "+" : ""}${v.toFixed(2)}`;
          return `<td style="background:${color}" title="${escapeHtml(title)}">${v === 0 ? "" : v.toFixed(2)}</td>`;
        })
        .join("");
      return `<tr><th scope="row">${escapeHtml(label)}</th>${cells}</tr>`;
    })
    .join("");
  return `<table class="heatmap">${head}${body}</table>`;
}

function evidenceList(items: string[], cls: string): string {
  if (!items.length) return "";
  return `<ul class="${cls}">` + items.map((s) => `<li>${escapeHtml(s)}</li>`).join("") + `</ul>`;
}

export function renderReport(report: Report | null): string {
  if (!report) return "";
  if (report.inconclusive) {
    return (
      `<h3>Assessment inconclusive</h3>` +
      `<p>Every candidate was ruled out.</p>` +
      evidenceList(report.eliminated.map((e) => `${e.disease}: ${e.reason}`), "eliminated") +
      `<p class="specialist">Recommended: ${escapeHtml(report.recommended_specialist)}</p>` +
      evidenceList(report.next_steps, "steps")
    );
  }
  const runners = report.runners_up.map(
    (r) => `${r.disease} (${r.confidence.toFixed(3)})`,
  );
  const supported = report.supporting_symptoms.map(
    (s) => `${s.canonical} (weight ${s.weight.toFixed(2)})`,
  );
  const tests = report.test_evidence
    .filter((t) => t.verdict !== "skipped")
    .map((t) => `${t.test_id} = ${t.value}: ${t.verdict} ${t.disease}`);
  const risks = report.risk_evidence.map((r) => `${r.description} (${r.disease})`);
  return (
    `<h3>Most likely: ${escapeHtml(report.most_likely ?? "")}</h3>` +
    `<p>Confidence ${report.confidence.toFixed(3)}, overall ${report.overall_confidence.toFixed(3)}.</p>` +
    (runners.length ? `<p>Also possible: ${escapeHtml(runners.join("; "))}</p>` : "") +
    evidenceList(supported, "supported") +
    evidenceList(tests, "tests") +
    evidenceList(risks, "risks") +
    (report.eliminated.length
      ? evidenceList(report.eliminated.map((e) => `${e.disease}: ${e.reason}`), "eliminated")
      : "") +
    `<p class="specialist">Recommended specialist: ${escapeHtml(report.recommended_specialist)}</p>` +
    evidenceList(report.next_steps, "steps")
  );
}

export function renderNotice(notice: string | null): string {
  if (!notice) return "";
  return `<div class="notice">${escapeHtml(notice)}</div>`;
}

export function renderStatusLine(view: ViewState): string {
  const overall = `overall confidence ${view.overall.toFixed(3)}`;
  const asked = `${view.questionsAsked} questions asked`;
  return escapeHtml(`${asked} · ${overall}`);
}
