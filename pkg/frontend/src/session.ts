// Pure session state. The exclusivity rule lives here: assigning an item
// to one role evicts it from the other, so best === worst has no
// representation and the submit payload cannot express it either.

import type { Assignment, JudgmentBody } from "./api.js";

export type Role = "best" | "worst";

export interface Selection {
  best: string | null;
  worst: string | null;
}

export const EMPTY_SELECTION: Selection = { best: null, worst: null };

export type Phase =
  | "loading"
  | "annotating"
  | "submitting"
  | "done"
  | "error";

export interface UiSession {
  campaignId: string;
  annotatorId: string;
  emotion: string;
  assignment: Assignment | null;
  selection: Selection;
  judged: number;
  total: number;
  phase: Phase;
  message: string | null;
}

export function freshSession(
  campaignId: string,
  annotatorId: string,
  emotion: string,
): UiSession {
  return {
    campaignId,
    annotatorId,
    emotion,
    assignment: null,
    selection: EMPTY_SELECTION,
    judged: 0,
    total: 0,
    phase: "loading",
    message: null,
  };
}

/**
 * Toggle an item's membership in a role. Re-picking the current holder
 * clears the role; picking the other role's holder moves the item over
 * and leaves that role empty.
 */
export function toggleSelection(
  selection: Selection,
  role: Role,
  itemId: string,
): Selection {
  const other: Role = role === "best" ? "worst" : "best";
  if (selection[role] === itemId) {
    return { ...selection, [role]: null };
  }
  const next: Selection = { ...selection, [role]: itemId };
  if (selection[other] === itemId) {
    next[other] = null;
  }
  return next;
}

export function canSubmit(selection: Selection): boolean {
  return (
    selection.best !== null &&
    selection.worst !== null &&
    selection.best !== selection.worst
  );
}

/** The only way to obtain a submit payload; null until the pair is valid. */
export function buildJudgment(session: UiSession): JudgmentBody | null {
  const { assignment, selection } = session;
  if (assignment === null || !canSubmit(selection)) return null;
  return {
    tuple_id: assignment.tuple.tuple_id,
    annotator_id: session.annotatorId,
    best: selection.best as string,
    worst: selection.worst as string,
  };
}
