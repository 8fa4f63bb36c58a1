import { describe, expect, test } from "vitest";

import { SentenceEditor } from "../src/editor.js";
import { isValidTagSequence, spansFromTags } from "../src/iob.js";

const TOKENS = ["jharkhand", "ke", "mukhyamantri", "hemant", "soren", "photo:", "PTI"];
const TAGS = ["B-LOC", "O", "O", "B-PER", "I-PER", "O", "O"];

function editor(): SentenceEditor {
  return new SentenceEditor("42", TOKENS, TAGS);
}

describe("construction", () => {
  test("length mismatch rejected", () => {
    expect(() => new SentenceEditor("1", ["a"], ["O", "O"])).toThrow(RangeError);
  });

  test("invalid server tags rejected", () => {
    expect(() => new SentenceEditor("1", ["a", "b"], ["I-PER", "O"])).toThrow(
      TypeError,
    );
  });
});

describe("verdict and dirty flag", () => {
  test("untouched task accepts with original tags", () => {
    const ed = editor();
    expect(ed.dirty).toBe(false);
    expect(ed.verdict()).toBe("accepted");
    expect([...ed.tags]).toEqual(TAGS);
  });

  test("an edit flips to edited; undoing it flips back", () => {
    const ed = editor();
    ed.clear(0, 0);
    expect(ed.verdict()).toBe("edited");
    ed.undo();
    expect(ed.verdict()).toBe("accepted");
    expect([...ed.tags]).toEqual(TAGS);
  });

  test("a no-op paint neither dirties nor grows the undo stack", () => {
    const ed = editor();
    ed.paint(3, 4, "PER"); // already PER(3,4)
    expect(ed.dirty).toBe(false);
    expect(ed.undo()).toBe(false);
  });
});

describe("undo and redo", () => {
  test("undo restores the exact prior state", () => {
    const ed = editor();
    const before = [...ed.tags];
    ed.paint(3, 6, "PER");
    const after = [...ed.tags];
    expect(ed.undo()).toBe(true);
    expect([...ed.tags]).toEqual(before);
    expect(ed.redo()).toBe(true);
    expect([...ed.tags]).toEqual(after);
  });

  test("a fresh edit clears the redo branch", () => {
    const ed = editor();
    ed.paint(5, 6, "ORG");
    ed.undo();
    ed.clear(0, 0);
    expect(ed.redo()).toBe(false);
  });

  test("k edits then k undos return to the original", () => {
    const ed = editor();
    ed.paint(1, 2, "LOC");
    ed.clear(3, 3);
    ed.paint(0, 6, "ORG");
    let undone = 0;
    while (ed.undo()) undone++;
    expect(undone).toBe(3);
    expect([...ed.tags]).toEqual(TAGS);
    let redone = 0;
    while (ed.redo()) redone++;
    expect(redone).toBe(3);
    expect(spansFromTags([...ed.tags])).toEqual([{ etype: "ORG", start: 0, end: 6 }]);
  });

  test("undo on a fresh editor reports false", () => {
    expect(editor().undo()).toBe(false);
    expect(editor().redo()).toBe(false);
  });
});

describe("screen state vs submitted payload", () => {
  test("final_tags reproduce the rendered spans exactly", () => {
    const ed = editor();
    ed.paint(5, 6, "ORG");
    ed.clear(0, 0);
    const submitted = [...ed.tags]; // what goes into the verdict body
    expect(isValidTagSequence(submitted)).toBe(true);
    expect(spansFromTags(submitted)).toEqual(ed.spans());
  });
});
