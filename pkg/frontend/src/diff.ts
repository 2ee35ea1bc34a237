/**
 * Alignment diff view-model.
 *
 * Spans are a 1:1 projection of the service's alignment ops, and the
 * totals are the service's counts passed through untouched. The UI never
 * recomputes S/D/I/N or CER: if these numbers are wrong, the bug is
 * server-side and the display must show it rather than mask it.
 */

import type { AlignmentPayload, OpKind } from "./api.js";

export interface DiffSpan {
  kind: OpKind;
  /** Unit shown in the diff: hypothesis side where one exists, else the
   * deleted reference unit. */
  text: string;
  ref: string | null;
  hyp: string | null;
}

export interface DiffView {
  spans: DiffSpan[];
  S: number;
  D: number;
  I: number;
  matches: number;
  N: number;
  cer: number;
}

export function buildDiffView(alignment: AlignmentPayload, cer: number): DiffView {
  const spans = alignment.ops.map((op) => ({
    kind: op.op,
    text: (op.op === "delete" ? op.ref : op.hyp) ?? "",
    ref: op.ref,
    hyp: op.hyp,
  }));
  return {
    spans,
    S: alignment.S,
    D: alignment.D,
    I: alignment.I,
    matches: alignment.matches,
    N: alignment.N,
    cer,
  };
}

export function spanCounts(view: DiffView): Record<OpKind, number> {
  const counts: Record<OpKind, number> = {
    match: 0,
    substitute: 0,
    delete: 0,
    insert: 0,
  };
  for (const span of view.spans) {
    counts[span.kind] += 1;
  }
  return counts;
}

/** Sanity check shown as a banner if a payload ever disagrees with its
 * own op list; the service is the single source of truth, so this
 * signals a contract break rather than something to silently fix. */
export function consistentWithTotals(view: DiffView): boolean {
  const counts = spanCounts(view);
  return (
    counts.match === view.matches &&
    counts.substitute === view.S &&
    counts.delete === view.D &&
    counts.insert === view.I &&
    counts.match + counts.substitute + counts.delete === view.N
  );
}
