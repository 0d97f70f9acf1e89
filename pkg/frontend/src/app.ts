// Controller: one session per tab, at most one in-flight submission, and
// an epoch stamp so responses for superseded assignments are discarded.

import { AnnotationApi, type JudgmentBody } from "./api.js";
import {
  EMPTY_SELECTION,
  buildJudgment,
  freshSession,
  toggleSelection,
  type Role,
  type UiSession,
} from "./session.js";
import {
  renderDone,
  renderMessage,
  renderProgress,
  renderTuple,
} from "./render.js";

export interface AppOptions {
  campaignId: string;
  annotatorId: string;
  emotion: string;
}

export class AnnotationApp {
  session: UiSession;
  private epoch = 0;
  private retryKind: "advance" | "submit" | null = null;

  constructor(
    private readonly root: HTMLElement,
    private readonly api: AnnotationApi,
    options: AppOptions,
  ) {
    this.session = freshSession(
      options.campaignId,
      options.annotatorId,
      options.emotion,
    );
  }

  async start(): Promise<void> {
    try {
      const progress = await this.api.progress(
        this.session.campaignId,
        this.session.annotatorId,
      );
      this.session.judged = progress.judged;
      this.session.total = progress.total;
    } catch {
      // progress is cosmetic at startup; the submit path refreshes it
    }
    await this.advance();
  }

  pick(role: Role, itemId: string): void {
    if (this.session.phase !== "annotating") return;
    this.session.selection = toggleSelection(this.session.selection, role, itemId);
    this.session.message = null;
    this.render();
  }

  pickByIndex(role: Role, index: number): void {
    const item = this.session.assignment?.items[index];
    if (item) this.pick(role, item.id);
  }

  async advance(): Promise<void> {
    const epoch = ++this.epoch;
    this.session.phase = "loading";
    this.session.assignment = null;
    this.session.selection = EMPTY_SELECTION;
    this.session.message = null;
    this.render();
    try {
      const next = await this.api.nextTuple(
        this.session.campaignId,
        this.session.annotatorId,
        this.session.emotion,
      );
      if (epoch !== this.epoch) return; // superseded while in flight
      if (next.done) {
        this.session.phase = "done";
      } else {
        this.session.assignment = next.assignment;
        this.session.phase = "annotating";
      }
    } catch (err) {
      if (epoch !== this.epoch) return;
      this.session.phase = "error";
      this.session.message = err instanceof Error ? err.message : String(err);
      this.retryKind = "advance";
    }
    this.render();
  }

  async submit(): Promise<void> {
    if (this.session.phase !== "annotating") return; // one in-flight max
    const judgment = buildJudgment(this.session);
    if (judgment === null) return;
    const epoch = this.epoch;
    this.session.phase = "submitting";
    this.render();

    let result;
    try {
      result = await this.api.submitJudgment(this.session.campaignId, judgment);
    } catch (err) {
      if (epoch !== this.epoch) return;
      // keep the selection: the judgment is re-built from it on retry
      this.session.phase = "error";
      this.session.message = err instanceof Error ? err.message : String(err);
      this.retryKind = "submit";
      this.render();
      return;
    }
    if (epoch !== this.epoch) return;

    if (result.kind === "ok") {
      this.session.judged = result.progress.judged;
      this.session.total = result.progress.total;
      await this.advance();
    } else if (result.kind === "conflict") {
      // already judged on the server; nothing was lost, move on
      await this.advance();
    } else {
      this.session.phase = "annotating";
      this.session.message = result.message;
      this.render();
    }
  }

  async retry(): Promise<void> {
    if (this.session.phase !== "error") return;
    const kind = this.retryKind;
    this.retryKind = null;
    if (kind === "submit") {
      this.session.phase = "annotating";
      await this.submit();
    } else {
      await this.advance();
    }
  }

  /** Offered so keyboards and tests share the click path. */
  judgmentPreview(): JudgmentBody | null {
    return buildJudgment(this.session);
  }

  private render(): void {
    const { session, root } = this;
    root.replaceChildren();

    if (session.phase === "done") {
      renderDone(root, session.judged);
      return;
    }
    if (session.phase === "loading") {
      renderMessage(root, "status", "Loading next tuple...");
      return;
    }
    if (session.phase === "error") {
      renderMessage(root, "problem", session.message ?? "request failed", () => {
        void this.retry();
      });
      return;
    }

    renderProgress(root, session.judged, session.total);
    if (session.message) {
      renderMessage(root, "problem", session.message);
    }
    if (session.assignment) {
      // renderTuple owns and clears its container, so give it its own node
      const stage = document.createElement("div");
      stage.className = "tuple-stage";
      root.append(stage);
      renderTuple(stage, session.assignment, session.selection, {
        onPick: (role, itemId) => this.pick(role, itemId),
        onSubmit: () => void this.submit(),
      });
    }
    if (session.phase === "submitting") {
      const button = root.querySelector<HTMLButtonElement>("button.submit");
      if (button) button.disabled = true;
    }
  }
}
