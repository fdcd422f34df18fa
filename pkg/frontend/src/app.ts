// Page bootstrap: wire the DOM to the controller and repaint on change.
// Everything interesting lives in controller.ts and render.ts; this file
// only shuffles strings into elements and events into method calls.

import { ServiceClient } from "./api.js";
import { ConsultationController, ViewState } from "./controller.js";
import {
  renderAttribution,
  renderChat,
  renderHypotheses,
  renderNotice,
  renderPhaseBadge,
  renderQuestionCard,
  renderReport,
  renderStatusLine,
} from "./render.js";

function apiBase(): string {
  const meta = document.querySelector('meta[name="api-base"]');
  return meta?.getAttribute("content") || "http://127.0.0.1:8000";
}

function el<T extends HTMLElement>(id: string): T {
  const found = document.getElementById(id);
  if (!found) throw new Error(`missing element #${id}`);
  return found as T;
}

function main(): void {
  const chatEl = el<HTMLDivElement>("chat");
  const noticeEl = el<HTMLDivElement>("notice");
  const phaseEl = el<HTMLSpanElement>("phase");
  const statusEl = el<HTMLSpanElement>("status-line");
  const serviceEl = el<HTMLSpanElement>("service-line");
  const hypsEl = el<HTMLDivElement>("hypotheses");
  const cardEl = el<HTMLDivElement>("question-card");
  const heatEl = el<HTMLDivElement>("heatmap");
  const reportEl = el<HTMLDivElement>("report");

  const messageForm = el<HTMLFormElement>("message-form");
  const messageInput = el<HTMLInputElement>("message-input");
  const testForm = el<HTMLFormElement>("test-form");
  const testInput = el<HTMLInputElement>("test-input");
  const unknownBtn = el<HTMLButtonElement>("unknown-btn");
  const yesBtn = el<HTMLButtonElement>("yes-btn");
  const noBtn = el<HTMLButtonElement>("no-btn");
  const unsureBtn = el<HTMLButtonElement>("unsure-btn");

  const render = (view: ViewState): void => {
    chatEl.innerHTML = renderChat(view.chat);
    chatEl.scrollTop = chatEl.scrollHeight;
    noticeEl.innerHTML = renderNotice(view.notice);
    phaseEl.innerHTML = renderPhaseBadge(view.phase);
    statusEl.innerHTML = renderStatusLine(view);
    serviceEl.textContent = view.serviceLine;
    hypsEl.innerHTML = renderHypotheses(view.hypotheses);
    cardEl.innerHTML = renderQuestionCard(view.next);
    heatEl.innerHTML = renderAttribution(view.attribution);
    reportEl.innerHTML = renderReport(view.report);

    const kind = view.next?.kind;
    // inputs a phase forbids stay disabled, not just unhandled
    const canText = !view.busy && (kind === "open" || kind === "question");
    const canAnswer = !view.busy && (kind === "question" || kind === "risk");
    const canTest = !view.busy && kind === "test";
    messageInput.disabled = !canText;
    yesBtn.disabled = !canAnswer;
    noBtn.disabled = !canAnswer;
    unsureBtn.disabled = !canAnswer;
    testInput.disabled = !canTest;
    unknownBtn.disabled = !canTest;
    testForm.style.display = kind === "test" ? "" : "none";
  };

  const client = new ServiceClient(apiBase());
  const controller = new ConsultationController(client, render);

  messageForm.addEventListener("submit", (e) => {
    e.preventDefault();
    const text = messageInput.value;
    messageInput.value = "";
    void controller.sendText(text);
  });
  testForm.addEventListener("submit", (e) => {
    e.preventDefault();
    const value = testInput.value;
    testInput.value = "";
    void controller.submitTest(value);
  });
  unknownBtn.addEventListener("click", () => {
    testInput.value = "";
    void controller.submitTest("unknown");
  });
  yesBtn.addEventListener("click", () => void controller.answer("yes"));
  noBtn.addEventListener("click", () => void controller.answer("no"));
  unsureBtn.addEventListener("click", () => void controller.answer("unsure"));

  void controller.start();
}

document.addEventListener("DOMContentLoaded", main);
