import { readFileSync } from 'node:fs';
import { join } from 'node:path';

import type { CriticalResponse, SimulateResponse, SweepResponse } from '../src/types.js';

export function fixture<T>(name: string): T {
  return JSON.parse(readFileSync(join(process.cwd(), 'tests', 'fixtures', name), 'utf-8')) as T;
}

export const simSmooth = () => fixture<SimulateResponse>('sim_smooth.json');
export const simGrowth = () => fixture<SimulateResponse>('sim_growth.json');
export const simDouble = () => fixture<SimulateResponse>('sim_double.json');
export const sweepC0 = () => fixture<SweepResponse>('sweep_c0.json');
export const criticalFixture = () => fixture<CriticalResponse>('critical.json');

export function jsonResponse(status: number, body: unknown): Response {
  return {
    ok: status >= 200 && status < 300,
    status,
    json: async () => body,
  } as unknown as Response;
}

/** Service double: answers from the captured fixtures, switching on the
 * request body, and records every call. Like the real service, the response
 * echoes the effective scenario of the request. */
export function installFetchStub(): { calls: Array<{ url: string; body: any }> } {
  const calls: Array<{ url: string; body: any }> = [];
  globalThis.fetch = (async (input: RequestInfo | URL, init?: RequestInit) => {
    const url = String(input);
    const body = init?.body ? JSON.parse(String(init.body)) : null;
    calls.push({ url, body });
    if (url.includes('/api/simulate')) {
      if (body.kappa <= 0) {
        return jsonResponse(400, {
          error: { code: 'RangeError', path: 'kappa', message: 'kappa: must be finite and > 0' },
        });
      }
      if (body.gap_threshold !== undefined && body.gap_threshold <= 0) {
        return jsonResponse(400, {
          error: { code: 'RangeError', path: 'gap_threshold', message: 'gap_threshold: must be > 0' },
        });
      }
      const base = body.sigma0 === 17 ? simDouble() : body.c0 === 1012 ? simGrowth() : simSmooth();
      const { downsample: _downsample, ...requested } = body;
      return jsonResponse(200, { ...base, scenario: { ...base.scenario, ...requested } });
    }
    if (url.includes('/api/sweep')) {
      return jsonResponse(200, sweepC0());
    }
    if (url.includes('/api/critical')) {
      const params = new URLSearchParams(url.split('?')[1]);
      if (Number(params.get('lambda')) === 0) {
        return jsonResponse(400, {
          error: { code: 'UndefinedCritical', path: 'lambda', message: 'no singularity' },
        });
      }
      return jsonResponse(200, criticalFixture());
    }
    return jsonResponse(404, { error: { code: 'NotFound', path: url, message: 'no stub' } });
  }) as typeof fetch;
  return { calls };
}

export const PAGE_HTML = `
  <span id="regime-badge"></span>
  <span id="termination-label"></span>
  <span id="critical-readout"></span>
  <div id="banner" hidden></div>
  <div id="controls"></div>
  <button id="pin-button"></button>
  <ul id="pin-list"></ul>
  <select id="sweep-axis">
    <option value="c0" selected>c0</option>
    <option value="lambda">lambda</option>
  </select>
  <input id="sweep-lo" type="number" value="1000">
  <input id="sweep-hi" type="number" value="1012">
  <input id="sweep-count" type="number" value="3">
  <button id="sweep-run"></button>
  <div id="chart-capital"></div>
  <div id="chart-implied"></div>
  <div id="chart-maturity"></div>
  <div id="sweep-panel" hidden></div>
`;

export function flush(): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, 0));
}
