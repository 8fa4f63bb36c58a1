/**
 * IOB2 tag-state machine for the review editor.
 *
 * Tags are the wire format (what the service stores and validates); spans
 * are what the screen shows. Every mutation works span-wise and re-emits
 * the tag sequence, so the result is IOB-valid by construction. Painting
 * or clearing removes whole overlapped spans rather than truncating them:
 * boundaries are never invented on the annotator's behalf.
 */

export type EntityType = "PER" | "LOC" | "ORG";

export const ENTITY_TYPES: readonly EntityType[] = ["PER", "LOC", "ORG"];

/** Inclusive token range carrying one entity type. */
export interface Span {
  etype: EntityType;
  start: number;
  end: number;
}

const VALID_TAGS = new Set<string>([
  "O",
  ...ENTITY_TYPES.flatMap((t) => [`B-${t}`, `I-${t}`]),
]);

/** True iff every tag is known and every I- continues a same-type span. */
export function isValidTagSequence(tags: readonly string[]): boolean {
  let openType: string | null = null;
  for (const tag of tags) {
    if (!VALID_TAGS.has(tag)) return false;
    if (tag.startsWith("I-")) {
      if (openType !== tag.slice(2)) return false;
    } else {
      openType = tag.startsWith("B-") ? tag.slice(2) : null;
    }
  }
  return true;
}

export function spansFromTags(tags: readonly string[]): Span[] {
  if (!isValidTagSequence(tags)) {
    throw new TypeError(`invalid tag sequence: ${tags.join(" ")}`);
  }
  const spans: Span[] = [];
  let open: Span | null = null;
  tags.forEach((tag, i) => {
    if (open !== null && !tag.startsWith("I-")) {
      spans.push(open);
      open = null;
    }
    if (tag.startsWith("B-")) {
      open = { etype: tag.slice(2) as EntityType, start: i, end: i };
    } else if (open !== null) {
      open.end = i;
    }
  });
  if (open !== null) spans.push(open);
  return spans;
}

export function tagsFromSpans(spans: readonly Span[], length: number): string[] {
  const tags = new Array<string>(length).fill("O");
  const ordered = [...spans].sort((a, b) => a.start - b.start);
  let prevEnd = -1;
  for (const span of ordered) {
    if (span.start < 0 || span.end >= length || span.start > span.end) {
      throw new RangeError(`span out of bounds: ${span.etype}(${span.start},${span.end})`);
    }
    if (span.start <= prevEnd) {
      throw new RangeError(`overlapping spans at ${span.start}`);
    }
    tags[span.start] = `B-${span.etype}`;
    for (let i = span.start + 1; i <= span.end; i++) tags[i] = `I-${span.etype}`;
    prevEnd = span.end;
  }
  return tags;
}

function checkRange(length: number, start: number, end: number): void {
  if (start < 0 || end >= length || start > end) {
    throw new RangeError(`token range (${start},${end}) out of 0..${length - 1}`);
  }
}

const outside = (start: number, end: number) => (s: Span) =>
  s.end < start || s.start > end;

/**
 * Set [start, end] to the given type. Any existing span touching the range
 * is removed first, so the result has no overlaps.
 */
export function paintSpan(
  tags: readonly string[],
  start: number,
  end: number,
  etype: EntityType,
): string[] {
  checkRange(tags.length, start, end);
  const kept = spansFromTags(tags).filter(outside(start, end));
  kept.push({ etype, start, end });
  return tagsFromSpans(kept, tags.length);
}

/** Remove every span touching [start, end]; whole spans only. */
export function clearRange(
  tags: readonly string[],
  start: number,
  end: number,
): string[] {
  checkRange(tags.length, start, end);
  return tagsFromSpans(spansFromTags(tags).filter(outside(start, end)), tags.length);
}
