/**
 * DOM wiring for the curation workbench: sample list with filters,
 * RTL ground-truth editor, keyboard-first triage (accept/reject/next),
 * reprocess panel with live preview, and the alignment diff.
 */

import {
  ApiError,
  ReviewApi,
  type SampleStatus,
  type SampleView,
  type Violation,
} from "./api.js";
import { buildDiffView, consistentWithTotals, type DiffView } from "./diff.js";
import {
  ReprocessPreview,
  markViolations,
  saveGroundTruth,
  saveStatus,
  type SaveResult,
} from "./editor.js";

interface AppState {
  samples: SampleView[];
  page: number;
  pages: number;
  statusFilter: string;
  current: SampleView | null;
  diff: DiffView | null;
  violations: Violation[];
  conflict: SampleView | null;
  notice: string;
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  ...children: (Node | string)[]
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    if (key === "class") node.className = value;
    else node.setAttribute(key, value);
  }
  node.append(...children);
  return node;
}

export class App {
  private state: AppState = {
    samples: [],
    page: 1,
    pages: 1,
    statusFilter: "",
    current: null,
    diff: null,
    violations: [],
    conflict: null,
    notice: "",
  };
  private preview: ReprocessPreview;

  constructor(
    private readonly api: ReviewApi,
    private readonly rootEl: HTMLElement,
  ) {
    this.preview = new ReprocessPreview(api);
  }

  async start(): Promise<void> {
    document.addEventListener("keydown", (event) => this.onKey(event));
    await this.loadPage(1);
    this.render();
  }

  private async loadPage(page: number): Promise<void> {
    const params: { page: number; status?: string } = { page };
    if (this.state.statusFilter) params.status = this.state.statusFilter;
    const result = await this.api.listSamples(params);
    this.state.samples = result.items;
    this.state.page = result.page;
    this.state.pages = result.pages;
    if (!this.state.current && result.items.length > 0) {
      this.state.current = result.items[0];
    }
  }

  private async select(sample: SampleView): Promise<void> {
    this.state.current = await this.api.getSample(sample.id);
    this.state.diff = null;
    this.state.violations = [];
    this.state.conflict = null;
    this.state.notice = "";
    this.render();
  }

  private currentIndex(): number {
    return this.state.samples.findIndex((s) => s.id === this.state.current?.id);
  }

  private async onKey(event: KeyboardEvent): Promise<void> {
    if (event.target instanceof HTMLTextAreaElement || event.target instanceof HTMLInputElement) {
      return; // typing, not triaging
    }
    const index = this.currentIndex();
    if (event.key === "j" || event.key === "ArrowDown") {
      const next = this.state.samples[index + 1];
      if (next) await this.select(next);
    } else if (event.key === "k" || event.key === "ArrowUp") {
      const prev = this.state.samples[index - 1];
      if (prev) await this.select(prev);
    } else if (event.key === "a" && this.state.current) {
      await this.transition(this.state.current, "clean");
    } else if (event.key === "r" && this.state.current) {
      await this.transition(this.state.current, "rejected");
    }
  }

  private async transition(sample: SampleView, status: SampleStatus): Promise<void> {
    const result = await saveStatus(this.api, sample, status);
    this.applySave(result);
    this.render();
  }

  private applySave(result: SaveResult): void {
    if (result.outcome === "saved") {
      this.state.current = result.sample;
      this.state.conflict = null;
      this.state.violations = [];
      this.state.notice = `saved (revision ${result.sample.revision})`;
      const index = this.state.samples.findIndex((s) => s.id === result.sample.id);
      if (index >= 0) this.state.samples[index] = result.sample;
    } else if (result.outcome === "conflict") {
      this.state.conflict = result.server;
      this.state.notice = "";
    } else {
      this.state.violations = result.violations;
      this.state.notice = "";
    }
  }

  private async onSave(textarea: HTMLTextAreaElement): Promise<void> {
    if (!this.state.current) return;
    const result = await saveGroundTruth(this.api, this.state.current, textarea.value);
    this.applySave(result);
    this.render();
  }

  private async onRecognize(engine: string): Promise<void> {
    if (!this.state.current || !engine) return;
    try {
      const response = await this.api.recognize(this.state.current.id, engine);
      this.state.diff = buildDiffView(response.alignment, response.cer);
      this.state.notice = "";
    } catch (error) {
      if (error instanceof ApiError) {
        const detail = error.detail as { error?: string; stderr?: string } | string | null;
        const text =
          typeof detail === "string" ? detail : detail?.stderr || detail?.error || "engine failed";
        this.state.notice = `engine error: ${text}`;
      } else {
        throw error;
      }
    }
    this.render();
  }

  private async onReprocess(form: HTMLFormElement): Promise<void> {
    if (!this.state.current) return;
    const data = new FormData(form);
    const params = {
      blur_k: Number(data.get("blur_k") ?? 4),
      threshold: Number(data.get("threshold") ?? 127),
      invert: data.get("invert") === "on",
    };
    try {
      const { result } = await this.preview.preview(this.state.current, params);
      this.state.current = await this.api.getSample(this.state.current.id);
      this.state.notice = result.low_contrast
        ? "low-contrast warning: threshold leaves almost everything on one side"
        : `processed ${result.width}x${result.height}`;
    } catch (error) {
      if (error instanceof ApiError && error.status === 422) {
        this.state.notice = "invalid parameters";
      } else {
        throw error;
      }
    }
    this.render();
  }

  render(): void {
    const { current } = this.state;
    this.rootEl.replaceChildren(
      el("div", { class: "layout" }, this.renderList(), current ? this.renderDetail(current) : el("div")),
    );
  }

  private renderList(): HTMLElement {
    const rows = this.state.samples.map((sample) => {
      const row = el(
        "li",
        { class: sample.id === this.state.current?.id ? "selected" : "" },
        el("span", { class: "sample-id" }, sample.id),
        el("span", { class: `status status-${sample.status}` }, sample.status),
        el("span", { class: "rev" }, `r${sample.revision}`),
      );
      row.addEventListener("click", () => void this.select(sample));
      return row;
    });
    const filter = el("select", { class: "status-filter" });
    for (const value of ["", "raw", "clean", "rejected"]) {
      const option = el("option", { value }, value || "all");
      if (value === this.state.statusFilter) option.setAttribute("selected", "");
      filter.append(option);
    }
    filter.addEventListener("change", async () => {
      this.state.statusFilter = filter.value;
      this.state.current = null;
      await this.loadPage(1);
      this.render();
    });
    return el(
      "nav",
      { class: "sample-list" },
      filter,
      el("ul", {}, ...rows),
      el("div", { class: "pager" }, `page ${this.state.page}/${this.state.pages}`),
      el("div", { class: "hint" }, "j/k: move · a: accept · r: reject"),
    );
  }

  private renderDetail(sample: SampleView): HTMLElement {
    const images = el(
      "div",
      { class: "images" },
      el("figure", {}, el("img", { src: this.api.imageUrl(sample.id, "raw", sample.revision), alt: "raw" }), el("figcaption", {}, "raw")),
      sample.stages.includes("processed")
        ? el(
            "figure",
            {},
            el("img", { src: this.api.imageUrl(sample.id, "processed", sample.revision), alt: "processed" }),
            el("figcaption", {}, "processed"),
          )
        : el("figure", {}, el("figcaption", {}, "no processed stage yet")),
    );

    const textarea = el("textarea", { dir: "rtl", lang: "syc", rows: "2" }) as HTMLTextAreaElement;
    textarea.value = sample.ground_truth;
    const saveButton = el("button", {}, "save ground truth");
    saveButton.addEventListener("click", () => void this.onSave(textarea));

    const editor = el("section", { class: "editor" }, textarea, saveButton);
    if (this.state.violations.length > 0) {
      const marked = el("p", { class: "violations", dir: "rtl" });
      for (const segment of markViolations(textarea.value, this.state.violations)) {
        marked.append(
          segment.invalid
            ? el("mark", { title: "not in the allowed charset" }, segment.text)
            : segment.text,
        );
      }
      editor.append(el("div", { class: "error" }, "charset violations:"), marked);
    }

    const reprocessForm = el("form", { class: "reprocess" }) as HTMLFormElement;
    reprocessForm.append(
      el("label", {}, "blur k ", el("input", { name: "blur_k", type: "number", value: "4", min: "1" })),
      el("label", {}, "threshold ", el("input", { name: "threshold", type: "number", value: "127", min: "0", max: "255" })),
      el("label", {}, el("input", { name: "invert", type: "checkbox", checked: "" }), " invert"),
      el("button", { type: "submit" }, "reprocess"),
    );
    reprocessForm.addEventListener("submit", (event) => {
      event.preventDefault();
      void this.onReprocess(reprocessForm);
    });

    const engineInput = el("input", { placeholder: "engine name", value: "reference" }) as HTMLInputElement;
    const recognizeButton = el("button", {}, "recognize");
    recognizeButton.addEventListener("click", () => void this.onRecognize(engineInput.value));

    const detail = el(
      "main",
      { class: "detail" },
      el("header", {}, el("h2", {}, sample.id), el("span", { class: `status status-${sample.status}` }, sample.status), el("span", {}, ` revision ${sample.revision} · split ${sample.split}`)),
      images,
      editor,
      reprocessForm,
      el("section", { class: "recognize" }, engineInput, recognizeButton),
    );

    if (this.state.conflict) {
      detail.append(
        renderConflictDialog(this.state.conflict, sample, (server) => {
          this.state.current = server;
          this.state.conflict = null;
          this.render();
        }),
      );
    }
    if (this.state.diff) {
      detail.append(renderDiff(this.state.diff));
    }
    if (this.state.notice) {
      detail.append(el("p", { class: "notice" }, this.state.notice));
    }
    return detail;
  }
}

/** Conflict dialog shown when a save lost the revision race; offers the
 * refetched server copy, never an automatic overwrite. */
export function renderConflictDialog(
  server: SampleView,
  local: SampleView,
  onTakeServer: (server: SampleView) => void,
): HTMLElement {
  const keepServer = el("button", {}, "take server version");
  keepServer.addEventListener("click", () => onTakeServer(server));
  return el(
    "dialog",
    { class: "conflict", open: "" },
    el("h3", {}, "edit conflict"),
    el(
      "p",
      {},
      `someone else updated this sample (server revision ${server.revision}, yours ${local.revision}); merge by hand or take the server version`,
    ),
    el("p", { dir: "rtl", class: "server-copy" }, server.ground_truth),
    keepServer,
  );
}

export function renderDiff(view: DiffView): HTMLElement {
  const line = el("p", { class: "diff-line", dir: "rtl" });
  for (const span of view.spans) {
    const node = el("span", { class: `op-${span.kind}` }, span.text || "·");
    if (span.kind === "substitute") {
      node.title = `was ${span.ref ?? ""}`;
    }
    line.append(node);
  }
  const totals = el(
    "p",
    { class: "diff-totals" },
    `S ${view.S} · D ${view.D} · I ${view.I} · N ${view.N} · CER ${view.cer.toFixed(2)}%`,
  );
  const section = el("section", { class: "diff" }, el("h3", {}, "alignment"), line, totals);
  if (!consistentWithTotals(view)) {
    section.prepend(el("p", { class: "error" }, "span counts disagree with server totals"));
  }
  return section;
}
