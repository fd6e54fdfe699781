// Typed client for the elicitation service. Every payload that reaches
// the UI passes through assertNoTruthField first: this application is
// expert-facing and must never hold a seed answer, whatever the server
// decides to send.

import { config } from "./config.js";

export interface DistributionDoc {
  family: string;
  params?: Record<string, number>;
  x?: number[];
  pdf?: number[];
}

export interface FitDoc {
  distribution: DistributionDoc;
  sse: number;
  family_candidates: [string, number][];
}

export interface JudgmentValues {
  minimum: number;
  q25: number;
  median: number;
  q75: number;
  maximum: number;
}

export interface JudgmentDoc extends JudgmentValues {
  quantity_id: string;
  expert_id: string;
  support: [number | null, number | null];
}

export interface JudgmentRecord {
  judgment: JudgmentDoc;
  fit: FitDoc | null;
}

export interface QuantityDoc {
  quantity_id: string;
  support: [number | null, number | null];
  scale: string;
  text: string;
}

export interface ExpertDoc {
  expert_id: string;
  name: string;
  knowledge_ratings: Record<string, number>;
  strengths: string;
  weaknesses: string;
}

export interface SessionDoc {
  session_id: string;
  stage: string;
  quantities: QuantityDoc[];
  experts: ExpertDoc[];
  judgments: JudgmentRecord[];
  consensus: JudgmentRecord[];
  audit_log: { event: string; details: Record<string, unknown>; at: string }[];
}

export interface SessionResponse {
  session: SessionDoc;
  version: number;
}

export interface FitResponse {
  fit: FitDoc;
  version: number;
}

export interface ConsensusResponse extends FitResponse {
  stage: string;
}

export interface OverlayDoc {
  quantity_id: string;
  x: number[];
  densities: Record<string, number[]>;
  consensus: number[] | null;
}

export interface PatientSampleDoc {
  source: string;
  parameters: Record<string, number>;
  sample: {
    total: number;
    counts: Record<string, number>;
    patients: string[];
    group_counts: Record<string, number>;
  };
}

export interface DelayedPositiveDoc {
  source: string;
  result: {
    estimate: number;
    interval: [number, number];
    level: number;
    n_draws: number;
  };
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
  ) {
    super(message);
  }
}

// 409 gets its own type so callers can offer a reload instead of an
// error box.
export class StaleVersionError extends ApiError {
  constructor(
    readonly expected: number,
    readonly actual: number,
    message: string,
  ) {
    super(409, "version_conflict", message);
  }
}

export class TruthLeakError extends Error {
  constructor(readonly path: string) {
    super(`payload contains a truth field at ${path}`);
  }
}

export function assertNoTruthField(payload: unknown, path = "$"): void {
  if (Array.isArray(payload)) {
    payload.forEach((item, i) => assertNoTruthField(item, `${path}[${i}]`));
    return;
  }
  if (payload !== null && typeof payload === "object") {
    for (const [key, value] of Object.entries(payload)) {
      if (key === "truth") throw new TruthLeakError(`${path}.${key}`);
      assertNoTruthField(value, `${path}.${key}`);
    }
  }
}

async function request<T>(
  method: string,
  path: string,
  body?: unknown,
): Promise<T> {
  const res = await fetch(config.baseUrl + path, {
    method,
    headers: body === undefined ? {} : { "Content-Type": "application/json" },
    body: body === undefined ? undefined : JSON.stringify(body),
  });
  const doc: unknown = await res.json();
  if (res.status === 409) {
    const err = doc as {
      message: string;
      details: { expected: number; actual: number };
    };
    throw new StaleVersionError(
      err.details.expected,
      err.details.actual,
      err.message,
    );
  }
  if (!res.ok) {
    const err = doc as { code?: string; message?: string };
    throw new ApiError(res.status, err.code ?? "unknown", err.message ?? `HTTP ${res.status}`);
  }
  assertNoTruthField(doc);
  return doc as T;
}

const enc = encodeURIComponent;

export function getSession(sessionId: string): Promise<SessionResponse> {
  return request("GET", `/sessions/${enc(sessionId)}`);
}

export function putStage(
  sessionId: string,
  stage: string,
  baseVersion?: number,
): Promise<SessionResponse> {
  return request("PUT", `/sessions/${enc(sessionId)}/stage`, {
    stage,
    ...(baseVersion === undefined ? {} : { base_version: baseVersion }),
  });
}

export function putJudgment(
  sessionId: string,
  expertId: string,
  quantityId: string,
  values: JudgmentValues,
  family?: string,
  baseVersion?: number,
): Promise<FitResponse> {
  return request(
    "PUT",
    `/sessions/${enc(sessionId)}/judgments/${enc(expertId)}/${enc(quantityId)}`,
    {
      ...values,
      ...(family === undefined ? {} : { family }),
      ...(baseVersion === undefined ? {} : { base_version: baseVersion }),
    },
  );
}

export function putConsensus(
  sessionId: string,
  quantityId: string,
  values: JudgmentValues,
  family?: string,
  baseVersion?: number,
): Promise<ConsensusResponse> {
  return request(
    "PUT",
    `/sessions/${enc(sessionId)}/consensus/${enc(quantityId)}`,
    {
      ...values,
      ...(family === undefined ? {} : { family }),
      ...(baseVersion === undefined ? {} : { base_version: baseVersion }),
    },
  );
}

export function getOverlay(
  sessionId: string,
  quantityId: string,
): Promise<OverlayDoc> {
  return request(
    "GET",
    `/sessions/${enc(sessionId)}/overlay/${enc(quantityId)}`,
  );
}

function query(params: Record<string, number | string>): string {
  const parts = Object.entries(params).map(
    ([k, v]) => `${enc(k)}=${enc(String(v))}`,
  );
  return parts.length ? `?${parts.join("&")}` : "";
}

export function getPatientSample(
  sessionId: string,
  params: Record<string, number>,
  total = 100,
): Promise<PatientSampleDoc> {
  return request(
    "GET",
    `/sessions/${enc(sessionId)}/checks/patient-sample${query({ total, ...params })}`,
  );
}

export function getDelayedPositive(
  sessionId: string,
  params: Record<string, number>,
): Promise<DelayedPositiveDoc> {
  return request(
    "GET",
    `/sessions/${enc(sessionId)}/checks/delayed-positive${query(params)}`,
  );
}

export interface SeedQuestionView {
  question_id: string;
  text: string;
  scale: string;
  judgments: JudgmentDoc[];
}

export function getSeedQuestions(
  datasetId: string,
): Promise<{ dataset_id: string; questions: SeedQuestionView[] }> {
  return request("GET", `/seed-datasets/${enc(datasetId)}/questions`);
}
