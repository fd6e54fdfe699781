import type { SessionDoc, JudgmentRecord, StaleVersionError } from "./api.js";

export interface Store<T> {
  get(): T;
  set(patch: Partial<T>): void;
  subscribe(fn: (state: T) => void): () => void;
}

export function createStore<T extends object>(initial: T): Store<T> {
  let state = initial;
  const listeners = new Set<(s: T) => void>();
  return {
    get: () => state,
    set(patch) {
      state = { ...state, ...patch };
      listeners.forEach((fn) => fn(state));
    },
    subscribe(fn) {
      listeners.add(fn);
      return () => listeners.delete(fn);
    },
  };
}

export interface AppState {
  sessionId: string;
  session: SessionDoc | null;
  version: number;
  expertId: string;
  role: "expert" | "facilitator";
  quantityId: string;
  // a stale write happened somewhere; the app shows a reload prompt
  conflict: StaleVersionError | null;
}

export const app = createStore<AppState>({
  sessionId: "",
  session: null,
  version: 0,
  expertId: "",
  role: "expert",
  quantityId: "",
  conflict: null,
});

export function judgmentFor(
  session: SessionDoc,
  expertId: string,
  quantityId: string,
): JudgmentRecord | undefined {
  return session.judgments.find(
    (r) =>
      r.judgment.expert_id === expertId &&
      r.judgment.quantity_id === quantityId,
  );
}

export function consensusFor(
  session: SessionDoc,
  quantityId: string,
): JudgmentRecord | undefined {
  return session.consensus.find((r) => r.judgment.quantity_id === quantityId);
}
