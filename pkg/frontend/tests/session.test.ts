import { beforeEach, describe, expect, it } from "vitest";

import { App } from "../src/app.js";
import { SessionState } from "../src/session.js";
import { FakeServer } from "./fake_server.js";

function frames(n: number): Array<[string, number]> {
  return Array.from({ length: n }, (_, i) => ["s01", i] as [string, number]);
}

describe("SessionState", () => {
  let server: FakeServer;
  let session: SessionState;

  beforeEach(() => {
    server = new FakeServer(frames(4));
    session = new SessionState(server, "a1", "labeler");
  });

  it("refresh pulls task and progress from the server", async () => {
    await session.refresh();
    expect(session.task).toMatchObject({ set_id: "s01", frame_index: 0 });
    expect(session.done).toBe(0);
    expect(session.total).toBe(4);
  });

  it("label submits and advances to the server's next task", async () => {
    await session.refresh();
    await session.label(2);
    expect(server.log).toEqual([{ annotator: "a1", setId: "s01", frameIndex: 0, label: 2 }]);
    expect(session.task?.frame_index).toBe(1);
    expect(session.done).toBe(1);
    expect(session.recent.at(-1)).toEqual({ setId: "s01", frameIndex: 0, label: 2 });
  });

  it("undo decrements progress and brings the frame back", async () => {
    await session.refresh();
    await session.label(1);
    await session.label(0);
    expect(session.task?.frame_index).toBe(2);
    await session.undo();
    expect(session.done).toBe(1);
    expect(session.task?.frame_index).toBe(1);
  });

  it("finishes when the queue is exhausted", async () => {
    await session.refresh();
    for (let i = 0; i < 4; i++) await session.label(1);
    expect(session.task).toBeNull();
    expect(session.finished).toBe(true);
  });

  it("a reload reconstructs state purely from the server", async () => {
    await session.refresh();
    await session.label(1);
    await session.label(2);
    const fresh = new SessionState(server, "a1", "labeler");
    await fresh.refresh();
    expect(fresh.done).toBe(2);
    expect(fresh.task?.frame_index).toBe(2);
  });

  it("keeps at most five recent labels for the undo display", async () => {
    server = new FakeServer(frames(8));
    session = new SessionState(server, "a1", "labeler");
    await session.refresh();
    for (let i = 0; i < 7; i++) await session.label(i % 3);
    expect(session.recent).toHaveLength(5);
    expect(session.recent[0].frameIndex).toBe(2);
  });
});

function appRoot(): HTMLElement {
  const root = document.createElement("div");
  root.id = "app";
  document.body.replaceChildren(root);
  return root;
}

describe("App keyboard loop", () => {
  it("keys 0/1/2 label and auto-advance; u undoes", async () => {
    const server = new FakeServer(frames(3));
    const app = new App({ annotator: "a1", client: server, root: appRoot() });
    await app.start();

    app.handleKey("2");
    await app.idle();
    expect(server.log.at(-1)?.label).toBe(2);
    expect(app.state.task?.frame_index).toBe(1);

    app.handleKey("0");
    await app.idle();
    expect(app.state.done).toBe(2);

    app.handleKey("u");
    await app.idle();
    expect(app.state.done).toBe(1);
    expect(app.state.task?.frame_index).toBe(1);
  });

  it("ignores unrelated keys", async () => {
    const server = new FakeServer(frames(2));
    const app = new App({ annotator: "a1", client: server, root: appRoot() });
    await app.start();
    app.handleKey("x");
    app.handleKey("Enter");
    await app.idle();
    expect(server.log).toHaveLength(0);
  });

  it("rejected label shows an inline error without advancing", async () => {
    const server = new FakeServer(frames(2));
    const app = new App({ annotator: "a1", client: server, root: appRoot() });
    await app.start();
    const bad = server.submitLabel.bind(server);
    server.submitLabel = async () => {
      throw new (await import("../src/api.js")).ApiError(400, "label must be one of [0, 1, 2]");
    };
    app.handleKey("1");
    await app.idle();
    const error = document.querySelector(".inline-error") as HTMLElement;
    expect(error.hidden).toBe(false);
    expect(error.textContent).toContain("label");
    expect(app.state.task?.frame_index).toBe(0);

    server.submitLabel = bad;
    app.handleKey("1");
    await app.idle();
    expect(error.hidden).toBe(true);
    expect(app.state.task?.frame_index).toBe(1);
  });

  it("unreachable server raises the blocking banner; a key retries", async () => {
    const server = new FakeServer(frames(2));
    const app = new App({ annotator: "a1", client: server, root: appRoot() });
    await app.start();

    server.offline = true;
    app.handleKey("1");
    await app.idle();
    const banner = document.querySelector(".banner") as HTMLElement;
    expect(banner.hidden).toBe(false);
    expect(server.log).toHaveLength(0);

    server.offline = false;
    app.handleKey("1"); // first key only retries the refresh
    await app.idle();
    expect(banner.hidden).toBe(true);
    app.handleKey("1");
    await app.idle();
    expect(server.log).toHaveLength(1);
  });

  it("renders the level legend verbatim", async () => {
    const server = new FakeServer(frames(1));
    const app = new App({ annotator: "a1", client: server, root: appRoot() });
    await app.start();
    const legend = document.querySelector(".legend")!.textContent!;
    expect(legend).toContain("0 (low): the subject is not paying attention to the task at hand");
    expect(legend).toContain("1 (mid): the subject is partially paying attention");
    expect(legend).toContain("2 (high): the subject is fully paying attention");
  });

  it("hides agreement outside review mode and for checkers", async () => {
    const server = new FakeServer(frames(1));
    let app = new App({ annotator: "a1", client: server, root: appRoot() });
    await app.start();
    let section = document.querySelector(".agreement") as HTMLElement;
    expect(section.hidden).toBe(true);

    app = new App({ annotator: "a1", client: server, review: true, root: appRoot() });
    await app.start();
    section = document.querySelector(".agreement") as HTMLElement;
    expect(section.hidden).toBe(false);

    app = new App({
      annotator: "checker",
      role: "checker",
      client: server,
      review: true,
      root: appRoot(),
    });
    await app.start();
    section = document.querySelector(".agreement") as HTMLElement;
    expect(section.hidden).toBe(true);
  });

  it("review mode renders votes_logged from the agreement payload", async () => {
    const server = new FakeServer(frames(2));
    const app = new App({ annotator: "a1", client: server, review: true, root: appRoot() });
    await app.start();
    app.handleKey("1");
    await app.idle();
    app.handleKey("g");
    await app.idle();
    expect(document.querySelector(".agreement-body")!.textContent).toContain("1 votes logged");
  });
});
