/**
 * DOM shell around the editor: token chips with drag selection, hotkeys,
 * and the submit/advance loop. All tag logic lives in iob.ts/editor.ts;
 * everything here is presentation and event plumbing.
 *
 * The service is the single source of truth: nothing is kept in browser
 * storage, so a refresh simply re-fetches the next unreviewed sentence.
 */

import { HttpError, ReviewClient, SubmitQueue, Task, Verdict } from "./api.js";
import { SentenceEditor } from "./editor.js";
import { ENTITY_TYPES, EntityType } from "./iob.js";

const TYPE_KEYS: Record<string, EntityType> = { p: "PER", l: "LOC", o: "ORG" };

const SHORTCUTS: ReadonlyArray<[string, string]> = [
  ["drag", "select tokens"],
  ["P / L / O", "mark selection as PER / LOC / ORG"],
  ["X", "clear spans under selection"],
  ["Z / Y", "undo / redo"],
  ["Enter", "accept (or submit edits when changed)"],
];

interface Selection {
  anchor: number;
  focus: number;
}

export class ReviewApp {
  private readonly client: ReviewClient;
  private readonly queue: SubmitQueue;
  private editor: SentenceEditor | null = null;
  private selection: Selection | null = null;
  private dragging = false;
  private exhausted = false;
  private banner: string | null = null;
  private bannerRetry = false;
  private saving = false;
  private progressLine = "";

  constructor(
    private readonly root: HTMLElement,
    private readonly annotator: string,
    baseUrl = "",
  ) {
    this.client = new ReviewClient(baseUrl);
    this.queue = new SubmitQueue((v: Verdict) => this.client.postVerdict(v));
    document.addEventListener("keydown", (event) => this.onKey(event));
    document.addEventListener("mouseup", () => {
      this.dragging = false;
    });
  }

  async start(): Promise<void> {
    await this.loadNext();
  }

  private async loadNext(): Promise<void> {
    this.banner = null;
    this.bannerRetry = false;
    try {
      const task = await this.client.nextTask(this.annotator);
      this.showTask(task);
      void this.refreshProgress();
    } catch {
      // editor state is untouched; the annotator can retry at will
      this.banner = "cannot reach the review service";
      this.bannerRetry = true;
    }
    this.render();
  }

  private showTask(task: Task | null): void {
    if (task === null) {
      this.editor = null;
      this.exhausted = true;
    } else {
      this.editor = new SentenceEditor(task.sentence_id, task.tokens, task.projected_tags);
      this.exhausted = false;
    }
    this.selection = null;
  }

  private async refreshProgress(): Promise<void> {
    try {
      const progress = await this.client.progress();
      const mine = progress[this.annotator];
      if (mine) {
        this.progressLine = `${mine.reviewed}/${mine.total} reviewed`;
        this.render();
      }
    } catch {
      // progress is decoration; ignore
    }
  }

  private async submit(): Promise<void> {
    if (this.editor === null || this.saving) return;
    const editor = this.editor;
    const verdict: Verdict = {
      sentence_id: editor.sentenceId,
      annotator_id: this.annotator,
      verdict: editor.verdict(),
      final_tags: [...editor.tags],
    };
    this.saving = true;
    this.banner = "saving…";
    this.render();

    // fetch the next task while the verdict posts; if the prefetch raced
    // ahead of the ack it returns the sentence just submitted, and we
    // fetch again
    const ack = this.queue.push(verdict);
    const prefetch = this.client
      .nextTask(this.annotator)
      .then((task) => ({ ok: true as const, task }))
      .catch(() => ({ ok: false as const }));
    try {
      await ack;
    } catch (err) {
      this.saving = false;
      this.banner =
        err instanceof HttpError ? `rejected: ${err.message}` : `rejected: ${err}`;
      this.render();
      return;
    }
    this.saving = false;
    const fetched = await prefetch;
    if (fetched.ok && (fetched.task === null || fetched.task.sentence_id !== verdict.sentence_id)) {
      this.banner = null;
      this.showTask(fetched.task);
      void this.refreshProgress();
      this.render();
    } else {
      await this.loadNext();
    }
  }

  private onKey(event: KeyboardEvent): void {
    if (event.ctrlKey || event.metaKey || event.altKey) return;
    const key = event.key.toLowerCase();
    if (key === "enter") {
      event.preventDefault();
      void this.submit();
      return;
    }
    if (this.editor === null) return;
    if (key === "z") {
      this.editor.undo();
    } else if (key === "y") {
      this.editor.redo();
    } else if (this.selection !== null && key in TYPE_KEYS) {
      const [start, end] = this.range(this.selection);
      this.editor.paint(start, end, TYPE_KEYS[key]!);
      this.selection = null;
    } else if (this.selection !== null && key === "x") {
      const [start, end] = this.range(this.selection);
      this.editor.clear(start, end);
      this.selection = null;
    } else {
      return;
    }
    event.preventDefault();
    this.render();
  }

  private range(sel: Selection): [number, number] {
    return [Math.min(sel.anchor, sel.focus), Math.max(sel.anchor, sel.focus)];
  }

  // -- rendering ----------------------------------------------------------

  private render(): void {
    this.root.replaceChildren();
    this.root.append(this.header());
    if (this.banner !== null) this.root.append(this.bannerBox());
    if (this.exhausted) {
      this.root.append(el("p", "done", "no sentences left to review"));
      return;
    }
    if (this.editor === null) return;
    this.root.append(this.sentenceBox(), this.controls(), this.legend());
  }

  private header(): HTMLElement {
    const head = el("div", "head");
    head.append(
      el("span", "who", `annotator: ${this.annotator}`),
      el("span", "progress", this.progressLine),
    );
    return head;
  }

  private bannerBox(): HTMLElement {
    const box = el("div", "banner", this.banner ?? "");
    if (this.bannerRetry) {
      const retry = el("button", "", "retry");
      retry.addEventListener("click", () => void this.loadNext());
      box.append(" ", retry);
    }
    return box;
  }

  private sentenceBox(): HTMLElement {
    const editor = this.editor!;
    const box = el("div", "sentence");
    const typeAt = new Map<number, { etype: EntityType; begin: boolean }>();
    for (const span of editor.spans()) {
      for (let i = span.start; i <= span.end; i++) {
        typeAt.set(i, { etype: span.etype, begin: i === span.start });
      }
    }
    const [selStart, selEnd] =
      this.selection === null ? [-1, -2] : this.range(this.selection);
    editor.tokens.forEach((token, i) => {
      const chip = el("span", "token", token);
      const mark = typeAt.get(i);
      if (mark) {
        chip.classList.add(`ent-${mark.etype}`);
        if (mark.begin) chip.classList.add("ent-begin");
      }
      if (i >= selStart && i <= selEnd) chip.classList.add("selected");
      chip.addEventListener("mousedown", (event) => {
        event.preventDefault();
        this.dragging = true;
        this.selection = { anchor: i, focus: i };
        this.render();
      });
      chip.addEventListener("mouseenter", () => {
        if (this.dragging && this.selection !== null) {
          this.selection = { ...this.selection, focus: i };
          this.render();
        }
      });
      box.append(chip);
    });
    if (editor.spans().length === 0) {
      box.append(el("div", "note", "no entities in this sentence"));
    }
    return box;
  }

  private controls(): HTMLElement {
    const editor = this.editor!;
    const bar = el("div", "controls");
    const submit = el(
      "button",
      "primary",
      editor.dirty ? "submit edits (Enter)" : "accept (Enter)",
    );
    submit.addEventListener("click", () => void this.submit());
    const undo = el("button", "", "undo (Z)");
    undo.addEventListener("click", () => {
      editor.undo();
      this.render();
    });
    const redo = el("button", "", "redo (Y)");
    redo.addEventListener("click", () => {
      editor.redo();
      this.render();
    });
    bar.append(submit, undo, redo, el("span", "state", editor.dirty ? "edited" : "unchanged"));
    return bar;
  }

  private legend(): HTMLElement {
    const box = el("div", "legend");
    for (const etype of ENTITY_TYPES) {
      const item = el("span", `key ent-${etype}`, etype);
      box.append(item);
    }
    const help = el("ul", "help");
    for (const [keys, what] of SHORTCUTS) {
      const row = el("li", "");
      row.append(el("b", "", keys), ` ${what}`);
      help.append(row);
    }
    box.append(help);
    return box;
  }
}

function el(tag: string, className: string, text?: string): HTMLElement {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export function mountApp(root: HTMLElement, annotator: string, baseUrl = ""): ReviewApp {
  const app = new ReviewApp(root, annotator, baseUrl);
  void app.start();
  return app;
}
