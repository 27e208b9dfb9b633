import { describe, expect, it } from "vitest";

import { ApiClient, ApiError, type FetchLike } from "../src/api.js";

function respond(status: number, body: unknown): ReturnType<FetchLike> {
  return Promise.resolve({
    ok: status >= 200 && status < 300,
    status,
    text: () => Promise.resolve(JSON.stringify(body)),
  });
}

describe("api client", () => {
  it("unwraps envelopes and forwards request bodies verbatim", async () => {
    const calls: { url: string; body?: string }[] = [];
    const fake: FetchLike = (url, init) => {
      calls.push({ url, body: init?.body });
      return respond(200, { request_id: "ab", seed: 11, payload: { n: 5 } });
    };
    const client = new ApiClient("http://svc", fake);
    const reply = await client.sample({ n: 5, seed: 11, interventions: { x1: 1 } });
    expect(reply.payload).toEqual({ n: 5 });
    expect(calls[0]!.url).toBe("http://svc/api/sample");
    expect(JSON.parse(calls[0]!.body!)).toEqual({ n: 5, seed: 11, interventions: { x1: 1 } });
  });

  it("turns error documents into ApiError with status, code and offenders", async () => {
    const fake: FetchLike = () =>
      respond(409, {
        error: "not-identifiable",
        message: "discrete descendant in the way",
        offenders: ["x3"],
      });
    const client = new ApiClient("", fake);
    const failure = await client
      .counterfactual({ factual_row: {}, interventions: { x1: 0 } })
      .then(() => null, (err: unknown) => err);
    expect(failure).toBeInstanceOf(ApiError);
    const apiErr = failure as ApiError;
    expect(apiErr.status).toBe(409);
    expect(apiErr.code).toBe("not-identifiable");
    expect(apiErr.offenders).toEqual(["x3"]);
  });

  it("copes with non-JSON error bodies", async () => {
    const fake: FetchLike = () =>
      Promise.resolve({ ok: false, status: 502, text: () => Promise.resolve("bad gateway") });
    const client = new ApiClient("", fake);
    const failure = await client.model().then(() => null, (err: unknown) => err);
    expect(failure).toBeInstanceOf(ApiError);
    expect((failure as ApiError).status).toBe(502);
  });

  it("aborts the previous in-flight request for the same panel", async () => {
    const seen: AbortSignal[] = [];
    const fake: FetchLike = (_url, init) => {
      const signal = init?.signal;
      if (signal !== undefined) seen.push(signal);
      return new Promise((resolve, reject) => {
        const finish = () =>
          resolve({
            ok: true,
            status: 200,
            text: () =>
              Promise.resolve(JSON.stringify({ request_id: "x", seed: 0, payload: {} })),
          });
        if (signal?.aborted) {
          reject(new DOMException("aborted", "AbortError"));
          return;
        }
        signal?.addEventListener("abort", () =>
          reject(new DOMException("aborted", "AbortError")),
        );
        // resolve on the next tick so a second call can land first
        setTimeout(finish, 5);
      });
    };
    const client = new ApiClient("", fake);
    const first = client.sample({ n: 1 });
    const second = client.sample({ n: 2 });
    const firstOutcome = await first.then(() => "resolved", (err: unknown) => err);
    expect(firstOutcome).toBeInstanceOf(DOMException);
    expect((firstOutcome as DOMException).name).toBe("AbortError");
    await expect(second).resolves.toMatchObject({ request_id: "x" });
    expect(seen[0]!.aborted).toBe(true);
    expect(seen[1]!.aborted).toBe(false);
  });

  it("keeps different panels independent", async () => {
    const seen: AbortSignal[] = [];
    const fake: FetchLike = (_url, init) => {
      if (init?.signal !== undefined) seen.push(init.signal);
      return respond(200, { request_id: "x", seed: null, payload: {} });
    };
    const client = new ApiClient("", fake);
    await Promise.all([client.model(), client.pdp("x2", "x1", 21)]);
    expect(seen.every((signal) => !signal.aborted)).toBe(true);
  });
});
