// DOM construction for one assignment: four tweet cards with mutually
// exclusive best/worst markers, hashtags highlighted, and a submit button
// that tracks selection validity. No innerHTML: tweet text is untrusted.

import type { Assignment } from "./api.js";
import { canSubmit, type Role, type Selection } from "./session.js";

export interface RenderHandlers {
  onPick: (role: Role, itemId: string) => void;
  onSubmit: () => void;
}

const HASHTAG = /#\w+/g;

/** Plain text to nodes, wrapping each hashtag in <mark class="hashtag">. */
export function highlightHashtags(text: string): DocumentFragment {
  const fragment = document.createDocumentFragment();
  let cursor = 0;
  for (const match of text.matchAll(HASHTAG)) {
    const start = match.index ?? 0;
    if (start > cursor) {
      fragment.append(document.createTextNode(text.slice(cursor, start)));
    }
    const mark = document.createElement("mark");
    mark.className = "hashtag";
    mark.textContent = match[0];
    fragment.append(mark);
    cursor = start + match[0].length;
  }
  if (cursor < text.length) {
    fragment.append(document.createTextNode(text.slice(cursor)));
  }
  return fragment;
}

function roleButton(
  role: Role,
  itemId: string,
  selection: Selection,
  handlers: RenderHandlers,
): HTMLButtonElement {
  const button = document.createElement("button");
  button.type = "button";
  button.className = `pick pick-${role}`;
  button.dataset.role = role;
  button.dataset.itemId = itemId;
  button.textContent = role === "best" ? "most intense" : "least intense";
  button.setAttribute("aria-pressed", selection[role] === itemId ? "true" : "false");
  button.addEventListener("click", () => handlers.onPick(role, itemId));
  return button;
}

export function renderTuple(
  container: HTMLElement,
  assignment: Assignment,
  selection: Selection,
  handlers: RenderHandlers,
): void {
  container.replaceChildren();

  const list = document.createElement("div");
  list.className = "cards";
  assignment.items.forEach((item, index) => {
    const card = document.createElement("article");
    card.className = "card";
    card.dataset.itemId = item.id;
    if (selection.best === item.id) card.classList.add("selected-best");
    if (selection.worst === item.id) card.classList.add("selected-worst");

    const label = document.createElement("span");
    label.className = "card-index";
    label.textContent = String(index + 1);
    card.append(label);

    const text = document.createElement("p");
    text.className = "tweet";
    text.append(highlightHashtags(item.text));
    card.append(text);

    card.append(roleButton("best", item.id, selection, handlers));
    card.append(roleButton("worst", item.id, selection, handlers));
    list.append(card);
  });
  container.append(list);

  const submit = document.createElement("button");
  submit.type = "button";
  submit.className = "submit";
  submit.textContent = "Submit judgment";
  submit.disabled = !canSubmit(selection);
  submit.addEventListener("click", () => handlers.onSubmit());
  container.append(submit);
}

export function renderDone(container: HTMLElement, judged: number): void {
  container.replaceChildren();
  const note = document.createElement("p");
  note.className = "done";
  note.textContent = `All tuples judged. Thank you! (${judged} judgments)`;
  container.append(note);
}

export function renderMessage(
  container: HTMLElement,
  kind: "status" | "problem",
  text: string,
  onRetry?: () => void,
): void {
  const note = document.createElement("p");
  note.className = kind;
  note.textContent = text;
  container.append(note);
  if (onRetry) {
    const retry = document.createElement("button");
    retry.type = "button";
    retry.className = "retry";
    retry.textContent = "Retry";
    retry.addEventListener("click", onRetry);
    container.append(retry);
  }
}

export function renderProgress(
  container: HTMLElement,
  judged: number,
  total: number,
): void {
  const bar = document.createElement("p");
  bar.className = "progress";
  bar.textContent = `${judged}/${total} tuples judged`;
  container.append(bar);
}
