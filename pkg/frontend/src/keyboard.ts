// Digits 1-4 mark best, shift+1-4 mark worst. Bound to event.code so the
// shifted digit row works on layouts where shift+1 types "!".

import type { Role } from "./session.js";

export interface KeyHandlers {
  onPick: (role: Role, cardIndex: number) => void;
}

const DIGIT_CODES: Record<string, number> = {
  Digit1: 0,
  Digit2: 1,
  Digit3: 2,
  Digit4: 3,
};

export function bindKeyboard(
  target: EventTarget,
  handlers: KeyHandlers,
): () => void {
  const listener = (event: Event) => {
    const key = event as KeyboardEvent;
    const index = DIGIT_CODES[key.code];
    if (index === undefined || key.ctrlKey || key.altKey || key.metaKey) return;
    key.preventDefault();
    handlers.onPick(key.shiftKey ? "worst" : "best", index);
  };
  target.addEventListener("keydown", listener);
  return () => target.removeEventListener("keydown", listener);
}
