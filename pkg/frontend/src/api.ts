/** Typed client for the simulation service. One in-flight request per
 * endpoint: each call bumps a sequence number and responses that come back
 * after a newer call started are reported as stale so the view can drop
 * them. */

import type {
  ApiErrorBody,
  CriticalResponse,
  ScenarioFields,
  SimulateResponse,
  SweepResponse,
} from './types.js';

export type ApiResult<T> =
  | { ok: true; data: T }
  | { ok: false; stale: true }
  | { ok: false; stale?: false; status: number; error: ApiErrorBody['error'] };

type Endpoint = 'simulate' | 'sweep' | 'critical' | 'lyapunov';

export interface SweepAxisRequest {
  name: string;
  lo?: number;
  hi?: number;
  count?: number;
  values?: number[];
}

export class ApiClient {
  private seq: Record<Endpoint, number> = { simulate: 0, sweep: 0, critical: 0, lyapunov: 0 };
  private inflight: Partial<Record<Endpoint, AbortController>> = {};

  constructor(private baseUrl: string = '') {}

  private async request<T>(endpoint: Endpoint, url: string, init?: RequestInit): Promise<ApiResult<T>> {
    const ticket = ++this.seq[endpoint];
    this.inflight[endpoint]?.abort();
    const controller = typeof AbortController !== 'undefined' ? new AbortController() : undefined;
    this.inflight[endpoint] = controller;
    let resp: Response;
    try {
      resp = await fetch(this.baseUrl + url, { ...init, signal: controller?.signal });
    } catch (err) {
      if (ticket !== this.seq[endpoint]) return { ok: false, stale: true };
      return {
        ok: false,
        status: 0,
        error: { code: 'NetworkError', path: '$', message: String(err) },
      };
    }
    const body = await resp.json();
    if (ticket !== this.seq[endpoint]) return { ok: false, stale: true };
    if (!resp.ok) {
      const error = (body as ApiErrorBody).error ?? {
        code: 'UnknownError',
        path: '$',
        message: `status ${resp.status}`,
      };
      return { ok: false, status: resp.status, error };
    }
    return { ok: true, data: body as T };
  }

  private post<T>(endpoint: Endpoint, url: string, payload: unknown): Promise<ApiResult<T>> {
    return this.request<T>(endpoint, url, {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify(payload),
    });
  }

  simulate(scenario: Partial<ScenarioFields>, downsample = 2000): Promise<ApiResult<SimulateResponse>> {
    return this.post('simulate', '/api/simulate', { ...scenario, downsample });
  }

  sweep(scenario: Partial<ScenarioFields>, axes: SweepAxisRequest[]): Promise<ApiResult<SweepResponse>> {
    return this.post('sweep', '/api/sweep', { ...scenario, axes });
  }

  critical(kappa: number, lambda: number, maturity?: number, dt?: number): Promise<ApiResult<CriticalResponse>> {
    const params = new URLSearchParams({ kappa: String(kappa), lambda: String(lambda) });
    if (maturity !== undefined) params.set('maturity', String(maturity));
    if (dt !== undefined) params.set('dt', String(dt));
    return this.request('critical', `/api/critical?${params.toString()}`);
  }
}
