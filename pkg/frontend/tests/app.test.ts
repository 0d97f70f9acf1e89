import { describe, expect, it } from "vitest";

import { AnnotationApi, type Assignment } from "../src/api.js";
import { AnnotationApp } from "../src/app.js";

function makeAssignment(tupleId: string): Assignment {
  const items = ["i1", "i2", "i3", "i4"].map((id) => ({
    id: `${tupleId}-${id}`,
    text: `tweet ${id} of ${tupleId}`,
  }));
  return {
    annotator_id: "ann",
    tuple: {
      tuple_id: tupleId,
      emotion: "joy",
      item_ids: items.map((i) => i.id),
    },
    items,
    served_at: 0,
  };
}

function jsonResponse(status: number, body: unknown): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "content-type": "application/json" },
  });
}

interface RecordedCall {
  url: string;
  method: string;
  body?: unknown;
}

/** FIFO fake server: each request consumes the next queued handler. */
class FakeServer {
  calls: RecordedCall[] = [];
  private queue: Array<() => Response | Promise<Response>> = [];

  reply(handler: () => Response | Promise<Response>): void {
    this.queue.push(handler);
  }

  fetch = async (input: RequestInfo | URL, init?: RequestInit): Promise<Response> => {
    const call: RecordedCall = {
      url: String(input),
      method: init?.method ?? "GET",
    };
    if (init?.body) call.body = JSON.parse(String(init.body));
    this.calls.push(call);
    const handler = this.queue.shift();
    if (!handler) throw new Error(`unexpected request: ${call.method} ${call.url}`);
    return handler();
  };

  posts(): RecordedCall[] {
    return this.calls.filter((c) => c.method === "POST");
  }

  nextFetches(): RecordedCall[] {
    return this.calls.filter((c) => c.url.includes("/next?"));
  }
}

function deferred<T>() {
  let resolve!: (value: T) => void;
  const promise = new Promise<T>((res) => {
    resolve = res;
  });
  return { promise, resolve };
}

async function startApp(server: FakeServer, first: Assignment) {
  const root = document.createElement("div");
  const api = new AnnotationApi({ baseUrl: "http://svc" }, server.fetch);
  const app = new AnnotationApp(root, api, {
    campaignId: "camp",
    annotatorId: "ann",
    emotion: "joy",
  });
  server.reply(() => jsonResponse(200, { annotator_id: "ann", judged: 0, total: 10 }));
  server.reply(() => jsonResponse(200, { done: false, assignment: first }));
  await app.start();
  return { root, app };
}

describe("annotation flow", () => {
  it("submits a selection, advances once, and shows progress 1/10", async () => {
    const server = new FakeServer();
    const a1 = makeAssignment("t1");
    const { root, app } = await startApp(server, a1);

    app.pick("best", "t1-i2");
    app.pick("worst", "t1-i4");
    server.reply(() =>
      jsonResponse(200, {
        acknowledged: true,
        progress: { annotator_id: "ann", judged: 1, total: 10 },
      }),
    );
    server.reply(() => jsonResponse(200, { done: false, assignment: makeAssignment("t2") }));
    await app.submit();

    expect(server.posts()).toHaveLength(1);
    expect(server.posts()[0]?.body).toEqual({
      tuple_id: "t1",
      annotator_id: "ann",
      best: "t1-i2",
      worst: "t1-i4",
    });
    // acknowledged submission is followed by exactly one next-tuple fetch
    expect(server.nextFetches()).toHaveLength(2);
    expect(root.querySelector(".progress")?.textContent).toBe("1/10 tuples judged");
    expect(app.session.assignment?.tuple.tuple_id).toBe("t2");
    expect(app.session.selection).toEqual({ best: null, worst: null });
  });

  it("advances past a 409 conflict without losing anything", async () => {
    const server = new FakeServer();
    const { app } = await startApp(server, makeAssignment("t1"));

    app.pick("best", "t1-i1");
    app.pick("worst", "t1-i3");
    server.reply(() =>
      jsonResponse(409, { code: "conflict", message: "'ann' already judged 't1'" }),
    );
    server.reply(() => jsonResponse(200, { done: false, assignment: makeAssignment("t2") }));
    await app.submit();

    expect(app.session.phase).toBe("annotating");
    expect(app.session.assignment?.tuple.tuple_id).toBe("t2");
    expect(app.session.selection).toEqual({ best: null, worst: null });
    expect(app.session.message).toBeNull();
    expect(server.nextFetches()).toHaveLength(2);
  });

  it("sends at most one POST under rapid double submission", async () => {
    const server = new FakeServer();
    const { app } = await startApp(server, makeAssignment("t1"));

    app.pick("best", "t1-i1");
    app.pick("worst", "t1-i2");
    const gate = deferred<Response>();
    server.reply(() => gate.promise);
    server.reply(() => jsonResponse(200, { done: true }));

    const firstClick = app.submit();
    const secondClick = app.submit(); // phase is submitting: must no-op
    gate.resolve(
      jsonResponse(200, {
        acknowledged: true,
        progress: { annotator_id: "ann", judged: 1, total: 1 },
      }),
    );
    await Promise.all([firstClick, secondClick]);

    expect(server.posts()).toHaveLength(1);
    expect(app.session.phase).toBe("done");
  });

  it("cannot submit while best or worst is missing", async () => {
    const server = new FakeServer();
    const { app } = await startApp(server, makeAssignment("t1"));

    app.pick("best", "t1-i1");
    await app.submit(); // no queued handler: a request would throw
    expect(server.posts()).toHaveLength(0);
    expect(app.judgmentPreview()).toBeNull();

    // the exclusivity rule also blocks equal picks made through the UI
    app.pick("worst", "t1-i1");
    await app.submit();
    expect(server.posts()).toHaveLength(0);
  });

  it("keeps state and shows the message on a 400", async () => {
    const server = new FakeServer();
    const { root, app } = await startApp(server, makeAssignment("t1"));

    app.pick("best", "t1-i1");
    app.pick("worst", "t1-i4");
    server.reply(() =>
      jsonResponse(400, { code: "validation_error", message: "campaign is closed" }),
    );
    await app.submit();

    expect(app.session.phase).toBe("annotating");
    expect(app.session.assignment?.tuple.tuple_id).toBe("t1");
    expect(app.session.selection).toEqual({ best: "t1-i1", worst: "t1-i4" });
    expect(root.querySelector(".problem")?.textContent).toBe("campaign is closed");
  });

  it("offers retry after a network failure and resubmits the same judgment", async () => {
    const server = new FakeServer();
    const { root, app } = await startApp(server, makeAssignment("t1"));

    app.pick("best", "t1-i2");
    app.pick("worst", "t1-i3");
    server.reply(() => {
      throw new Error("connection refused");
    });
    await app.submit();
    expect(app.session.phase).toBe("error");
    expect(root.querySelector("button.retry")).not.toBeNull();

    server.reply(() =>
      jsonResponse(200, {
        acknowledged: true,
        progress: { annotator_id: "ann", judged: 1, total: 10 },
      }),
    );
    server.reply(() => jsonResponse(200, { done: false, assignment: makeAssignment("t2") }));
    await app.retry();

    const posts = server.posts();
    expect(posts).toHaveLength(2);
    expect(posts[1]?.body).toEqual(posts[0]?.body);
    expect(app.session.assignment?.tuple.tuple_id).toBe("t2");
  });

  it("shows the completion screen on the done marker", async () => {
    const server = new FakeServer();
    const root = document.createElement("div");
    const api = new AnnotationApi({ baseUrl: "http://svc" }, server.fetch);
    const app = new AnnotationApp(root, api, {
      campaignId: "camp",
      annotatorId: "ann",
      emotion: "joy",
    });
    server.reply(() => jsonResponse(200, { annotator_id: "ann", judged: 3, total: 3 }));
    server.reply(() => jsonResponse(200, { done: true }));
    await app.start();
    expect(app.session.phase).toBe("done");
    expect(root.querySelector(".done")?.textContent).toContain("All tuples judged");
  });

  it("discards a stale next-tuple response from a superseded fetch", async () => {
    const server = new FakeServer();
    const root = document.createElement("div");
    const api = new AnnotationApi({ baseUrl: "http://svc" }, server.fetch);
    const app = new AnnotationApp(root, api, {
      campaignId: "camp",
      annotatorId: "ann",
      emotion: "joy",
    });

    const slow = deferred<Response>();
    server.reply(() => jsonResponse(200, { annotator_id: "ann", judged: 0, total: 10 }));
    server.reply(() => slow.promise);
    const started = app.start();
    // let start() reach its next-tuple fetch before queueing the newer reply
    await new Promise((resolve) => setTimeout(resolve, 0));

    server.reply(() => jsonResponse(200, { done: false, assignment: makeAssignment("tNew") }));
    await app.advance();
    expect(app.session.assignment?.tuple.tuple_id).toBe("tNew");

    // the older fetch resolves late; its assignment must not take over
    slow.resolve(jsonResponse(200, { done: false, assignment: makeAssignment("tOld") }));
    await started;
    expect(app.session.assignment?.tuple.tuple_id).toBe("tNew");
    expect(app.session.phase).toBe("annotating");
  });
});
