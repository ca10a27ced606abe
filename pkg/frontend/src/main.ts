// Browser entry: renders the funnel into #app and wires user events.
// All rendering state comes from the view models; the DOM is rebuilt per
// state change (the models are small enough that diffing buys nothing).

import { FunnelApi } from "./api.js";
import { setGroupKind, toggleVariation } from "./clausePanel.js";
import { FunnelController, stepIndex, type FunnelStep } from "./funnel.js";
import { chainStepAnchors, highlightPassages, SpanMismatchError } from "./passageView.js";
import { buildTraceView, formatScore } from "./traceView.js";

const STEPS: { id: FunnelStep; label: string }[] = [
  { id: "query", label: "1 · Query" },
  { id: "expansion", label: "2 · Expansion" },
  { id: "results", label: "3 · Results" },
  { id: "document", label: "4 · Document" },
  { id: "answer", label: "5 · Answer" },
];

function el(tag: string, className?: string, text?: string): HTMLElement {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export function mount(root: HTMLElement, controller: FunnelController): void {
  controller.onChange(() => render(root, controller));
  render(root, controller);
}

function render(root: HTMLElement, controller: FunnelController): void {
  const state = controller.state;
  root.textContent = "";

  const nav = el("nav", "steps");
  for (const step of STEPS) {
    const button = el("button", "step", step.label) as HTMLButtonElement;
    if (step.id === state.step) button.classList.add("active");
    button.disabled = stepIndex(step.id) > stepIndex(state.step);
    button.onclick = () => controller.goBack(step.id);
    nav.appendChild(button);
  }
  root.appendChild(nav);

  if (state.error) root.appendChild(el("div", "error", state.error));
  if (state.pending) root.appendChild(el("div", "pending", "working…"));

  switch (state.step) {
    case "query":
      renderQuery(root, controller);
      break;
    case "expansion":
      renderExpansion(root, controller);
      break;
    case "results":
      renderResults(root, controller);
      break;
    case "document":
      renderDocument(root, controller);
      break;
    case "answer":
      renderAnswer(root, controller);
      break;
  }
}

function renderQuery(root: HTMLElement, controller: FunnelController): void {
  const form = el("div", "query-form");
  const input = el("input") as HTMLInputElement;
  input.placeholder = "ask about the corpus…";
  input.value = controller.state.query;
  const go = el("button", "", "Expand") as HTMLButtonElement;
  go.onclick = () => void controller.loadExpansion(input.value);
  input.onkeydown = (e) => {
    if (e.key === "Enter") go.click();
  };
  form.append(input, go);
  root.appendChild(form);
}

function renderExpansion(root: HTMLElement, controller: FunnelController): void {
  const panel = controller.state.panel;
  if (panel === null) return;
  const container = el("section", "clause-panel");
  if (panel.noEntitiesDetected) {
    container.appendChild(el("div", "banner", "no entities detected"));
  }
  for (const group of panel.groups) {
    const card = el("div", `group origin-${group.origin}`);
    const head = el("header");
    head.appendChild(el("span", "origin", group.origin));
    head.appendChild(el("span", "boost", `boost ${formatScore(group.boost)}`));
    const kind = el("button", "kind", group.kind.toUpperCase()) as HTMLButtonElement;
    kind.onclick = () => {
      const next = group.kind === "must" ? "should" : "must";
      controller.state = {
        ...controller.state,
        panel: setGroupKind(panel, group.key, next),
      };
      render(root.parentElement ?? root, controller);
    };
    head.appendChild(kind);
    card.appendChild(head);
    for (const variation of group.variations) {
      const row = el("label", "variation");
      const box = el("input") as HTMLInputElement;
      box.type = "checkbox";
      box.checked = variation.enabled;
      box.onchange = () => {
        controller.state = {
          ...controller.state,
          panel: toggleVariation(panel, group.key, variation.text),
        };
        render(root.parentElement ?? root, controller);
      };
      row.appendChild(box);
      row.appendChild(el("span", `tier tier-${variation.tier}`, variation.tier));
      row.appendChild(el("span", "text", variation.text));
      row.appendChild(el("span", "weight", formatScore(variation.weight)));
      card.appendChild(row);
    }
    container.appendChild(card);
  }
  const execute = el("button", "primary", "Search with this tree") as HTMLButtonElement;
  execute.onclick = () => void controller.runSearch();
  container.appendChild(execute);
  root.appendChild(container);
}

function renderResults(root: HTMLElement, controller: FunnelController): void {
  const results = controller.state.results ?? [];
  const list = el("section", "results");
  if (results.length === 0) {
    list.appendChild(
      el("div", "banner", "no documents matched every required clause"),
    );
  }
  for (const result of results) {
    const row = el("article", "result");
    row.appendChild(el("span", "rank", `#${result.rank}`));
    const title = el("a", "title", result.title || result.doc_id);
    title.onclick = () => void controller.selectDocument(result.doc_id);
    row.appendChild(title);
    row.appendChild(el("span", "score", formatScore(result.score)));
    row.appendChild(el("p", "snippet", result.snippet));
    list.appendChild(row);
  }
  const traceButton = el("button", "", "Inspect trace") as HTMLButtonElement;
  traceButton.onclick = () =>
    void controller.loadSearchTrace().then(() => renderTraceInto(list, controller));
  list.appendChild(traceButton);
  root.appendChild(list);
}

function renderTraceInto(parent: HTMLElement, controller: FunnelController): void {
  const events = controller.state.traceEvents;
  if (events === null) return;
  const existing = parent.querySelector(".trace");
  if (existing) existing.remove();
  const view = buildTraceView(events);
  const timeline = el("ol", "trace");
  for (const node of view.nodes) {
    const item = el("li", `trace-node stage-${node.stage}`);
    item.appendChild(el("strong", "", `${node.ordinal}. ${node.label}`));
    if (node.hopRows) {
      const rows = el("ul", "hop-rows");
      for (const row of node.hopRows) {
        rows.appendChild(el("li", "", `chunk ${row.chunkId}: ${formatScore(row.score)}`));
      }
      item.appendChild(rows);
    }
    if (node.fusionRows) {
      const table = el("table", "fusion");
      const head = el("tr");
      for (const h of ["chunk", "sparse rank", "dense rank", "fused"]) {
        head.appendChild(el("th", "", h));
      }
      table.appendChild(head);
      for (const row of node.fusionRows) {
        const tr = el("tr");
        tr.appendChild(el("td", "", String(row.chunkId)));
        tr.appendChild(el("td", "", row.sparseRank === null ? "–" : String(row.sparseRank)));
        tr.appendChild(el("td", "", row.denseRank === null ? "–" : String(row.denseRank)));
        tr.appendChild(el("td", "", formatScore(row.fusedScore)));
        table.appendChild(tr);
      }
      item.appendChild(table);
    }
    if (node.rankedRows) {
      const rows = el("ul", "ranked-rows");
      for (const row of node.rankedRows) {
        rows.appendChild(
          el("li", "", `#${row.rank} ${row.id} (${formatScore(row.score)})`),
        );
      }
      item.appendChild(rows);
    }
    timeline.appendChild(item);
  }
  parent.appendChild(timeline);
}

function renderDocument(root: HTMLElement, controller: FunnelController): void {
  const doc = controller.state.selectedDoc;
  if (doc === null) return;
  const section = el("section", "document");
  section.appendChild(el("h2", "", doc.title || doc.id));
  for (const chunk of doc.chunks) {
    const block = el("p", `chunk field-${chunk.source_field}`, chunk.text);
    block.id = `chunk-${doc.id}-${chunk.chunk_id}`;
    section.appendChild(block);
  }
  const form = el("div", "ask-form");
  const input = el("input") as HTMLInputElement;
  input.placeholder = "ask this document…";
  const outputs: ("extractive" | "chain" | "packed")[] = ["extractive", "chain", "packed"];
  const select = el("select") as HTMLSelectElement;
  for (const output of outputs) {
    const option = el("option", "", output) as HTMLOptionElement;
    option.value = output;
    select.appendChild(option);
  }
  const go = el("button", "primary", "Ask") as HTMLButtonElement;
  go.onclick = () =>
    void controller.ask(input.value, select.value as "extractive" | "chain" | "packed");
  form.append(input, select, go);
  section.appendChild(form);
  root.appendChild(section);
}

function renderAnswer(root: HTMLElement, controller: FunnelController): void {
  const state = controller.state;
  const doc = state.selectedDoc;
  const answer = state.answer;
  if (doc === null || answer === null) return;
  const section = el("section", "answer");
  section.appendChild(el("h2", "", answer.question));
  section.appendChild(el("p", "generated", answer.answer));

  try {
    const annotated = highlightPassages(doc, answer.passages ?? []);
    if (annotated.noEvidence && answer.output === "extractive") {
      section.appendChild(el("div", "banner", "no extractive evidence"));
    }
    for (const chunk of annotated.chunks) {
      const block = el("p", "chunk");
      block.id = chunk.anchorId;
      for (const segment of chunk.segments) {
        const span = el(
          "span",
          segment.highlighted ? "highlight" : "",
          segment.text,
        );
        if (segment.passageRank !== undefined) {
          span.title = `passage #${segment.passageRank}`;
        }
        block.appendChild(span);
      }
      section.appendChild(block);
    }
  } catch (err) {
    if (err instanceof SpanMismatchError) {
      section.appendChild(el("div", "error", err.message));
    } else {
      throw err;
    }
  }

  for (const step of answer.chain ?? []) {
    const card = el("div", "chain-step");
    const link = el("a", "", `hop ${step.hop}`);
    link.onclick = () => {
      const anchors = chainStepAnchors(doc.id, step);
      const first = anchors[0] !== undefined ? document.getElementById(anchors[0]) : null;
      first?.scrollIntoView({ behavior: "smooth" });
    };
    card.appendChild(link);
    for (const evidence of step.evidence) {
      card.appendChild(
        el("p", "evidence", `chunk ${evidence.chunk_id} (${formatScore(evidence.score)}): ${evidence.excerpt}`),
      );
    }
    section.appendChild(card);
  }

  if (state.traceEvents) {
    renderTraceInto(section, controller);
  }
  root.appendChild(section);
}

// boot when loaded in a page (tests import the modules directly)
if (typeof document !== "undefined" && document.getElementById("app")) {
  const controller = new FunnelController(new FunnelApi(""));
  mount(document.getElementById("app") as HTMLElement, controller);
}
