// Shared test plumbing: fixtures captured from a live service (see
// fixtures/capture.sh) and a fetch stub that replays them.

import { vi } from "vitest";

export interface StubCall {
  url: string;
  method: string;
  body: unknown;
}

export function stubFetch(
  route: (url: string, init?: RequestInit) => { status?: number; body: unknown },
): StubCall[] {
  const calls: StubCall[] = [];
  vi.stubGlobal(
    "fetch",
    vi.fn(async (url: string, init?: RequestInit) => {
      calls.push({
        url,
        method: init?.method ?? "GET",
        body: init?.body ? JSON.parse(init.body as string) : undefined,
      });
      const { status = 200, body } = route(url, init);
      return {
        ok: status >= 200 && status < 300,
        status,
        json: async () => body,
      } as Response;
    }),
  );
  return calls;
}

// microtask-only flush so it also works under fake timers
export async function flushAsync(turns = 8): Promise<void> {
  for (let i = 0; i < turns; i++) await Promise.resolve();
}
