// Entry point: a small settings form, then the annotation loop. The
// service base URL is the one configurable setting and is remembered.

import { AnnotationApi } from "./api.js";
import { AnnotationApp } from "./app.js";
import { bindKeyboard } from "./keyboard.js";

const BASE_URL_KEY = "emotensity.baseUrl";

function field(form: HTMLFormElement, name: string): string {
  const input = form.elements.namedItem(name) as HTMLInputElement | null;
  return input ? input.value.trim() : "";
}

export function boot(document: Document): void {
  const form = document.querySelector<HTMLFormElement>("#setup");
  const stage = document.querySelector<HTMLElement>("#stage");
  if (!form || !stage) return;

  const baseInput = form.elements.namedItem("baseUrl") as HTMLInputElement | null;
  if (baseInput) {
    baseInput.value =
      window.localStorage.getItem(BASE_URL_KEY) ?? "http://127.0.0.1:8000";
  }

  form.addEventListener("submit", (event) => {
    event.preventDefault();
    const baseUrl = field(form, "baseUrl");
    window.localStorage.setItem(BASE_URL_KEY, baseUrl);

    const api = new AnnotationApi({ baseUrl });
    const app = new AnnotationApp(stage, api, {
      campaignId: field(form, "campaign"),
      annotatorId: field(form, "annotator"),
      emotion: field(form, "emotion"),
    });
    bindKeyboard(document, {
      onPick: (role, index) => app.pickByIndex(role, index),
    });
    form.hidden = true;
    void app.start();
  });
}

if (typeof window !== "undefined" && typeof document !== "undefined") {
  boot(document);
}
