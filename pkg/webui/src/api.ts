/** Thin client over the service HTTP API. The fetch implementation is
 * injected so tests can run without a network. */

import type { SoundscapeDoc } from "./types.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export interface ValidationIssue {
  severity: string;
  path: string;
  message: string;
}

export class ServiceError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
    readonly report?: ValidationIssue[],
  ) {
    super(message);
  }
}

async function fail(resp: Response): Promise<never> {
  let code = "http_error";
  let message = `${resp.status}`;
  let report: ValidationIssue[] | undefined;
  try {
    const body = await resp.json();
    code = body.code ?? code;
    message = body.message ?? message;
    report = body.report;
  } catch {
    /* non-JSON error body */
  }
  throw new ServiceError(resp.status, code, message, report);
}

export class ServiceClient {
  constructor(
    readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = (u, i) => fetch(u, i),
  ) {}

  async getSoundscape(id: string, embed = false): Promise<SoundscapeDoc> {
    const resp = await this.fetchImpl(`${this.baseUrl}/soundscapes/${id}?embed=${embed}`);
    if (!resp.ok) await fail(resp);
    return (await resp.json()) as SoundscapeDoc;
  }

  async putSoundscape(doc: SoundscapeDoc): Promise<{ id: string; report: ValidationIssue[] }> {
    const resp = await this.fetchImpl(`${this.baseUrl}/soundscapes`, {
      method: "PUT",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(doc),
    });
    if (!resp.ok) await fail(resp);
    return (await resp.json()) as { id: string; report: ValidationIssue[] };
  }

  async putAsset(
    bytes: ArrayBuffer | Uint8Array,
  ): Promise<{ id: string; duration: number; channels: number; sample_rate: number }> {
    const body = bytes instanceof Uint8Array
      ? bytes.slice().buffer
      : bytes;
    const resp = await this.fetchImpl(`${this.baseUrl}/assets`, {
      method: "PUT",
      headers: { "content-type": "audio/wav" },
      body,
    });
    if (!resp.ok) await fail(resp);
    return await resp.json();
  }

  assetUrl(id: string): string {
    return `${this.baseUrl}/assets/${id}`;
  }

  sessionUrl(scapeId: string): string {
    const ws = this.baseUrl.replace(/^http/, "ws");
    return `${ws}/session/${scapeId}`;
  }
}
