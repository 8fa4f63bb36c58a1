import {
  EntityType,
  Span,
  clearRange,
  isValidTagSequence,
  paintSpan,
  spansFromTags,
} from "./iob.js";

const sameTags = (a: readonly string[], b: readonly string[]) =>
  a.length === b.length && a.every((tag, i) => tag === b[i]);

/**
 * Editable tag state for one sentence. Holds the undo/redo stacks and the
 * dirty flag that decides between the "accepted" and "edited" verdicts.
 * No-op edits (painting what is already there) change nothing, not even
 * the undo stack.
 */
export class SentenceEditor {
  readonly sentenceId: string;
  readonly tokens: readonly string[];
  private readonly original: readonly string[];
  private current: string[];
  private undoStack: string[][] = [];
  private redoStack: string[][] = [];

  constructor(sentenceId: string, tokens: readonly string[], tags: readonly string[]) {
    if (tokens.length !== tags.length) {
      throw new RangeError(`${tokens.length} tokens but ${tags.length} tags`);
    }
    if (!isValidTagSequence(tags)) {
      throw new TypeError(`sentence ${sentenceId}: invalid tags from server`);
    }
    this.sentenceId = sentenceId;
    this.tokens = [...tokens];
    this.original = [...tags];
    this.current = [...tags];
  }

  get tags(): readonly string[] {
    return this.current;
  }

  get dirty(): boolean {
    return !sameTags(this.current, this.original);
  }

  verdict(): "accepted" | "edited" {
    return this.dirty ? "edited" : "accepted";
  }

  spans(): Span[] {
    return spansFromTags(this.current);
  }

  paint(start: number, end: number, etype: EntityType): void {
    this.apply(paintSpan(this.current, start, end, etype));
  }

  clear(start: number, end: number): void {
    this.apply(clearRange(this.current, start, end));
  }

  undo(): boolean {
    const prior = this.undoStack.pop();
    if (prior === undefined) return false;
    this.redoStack.push(this.current);
    this.current = prior;
    return true;
  }

  redo(): boolean {
    const next = this.redoStack.pop();
    if (next === undefined) return false;
    this.undoStack.push(this.current);
    this.current = next;
    return true;
  }

  private apply(next: string[]): void {
    if (sameTags(next, this.current)) return;
    this.undoStack.push(this.current);
    this.redoStack = [];
    this.current = next;
  }
}
