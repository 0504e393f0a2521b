import { beforeEach, describe, expect, it } from 'vitest';

import { ApiClient } from '../src/api.js';
import { DEBOUNCE_MS, ExplorerApp } from '../src/app.js';
import { decodeScenario } from '../src/state.js';
import { installFetchStub, jsonResponse, PAGE_HTML, flush, simSmooth, simGrowth } from './helpers.js';

function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}

async function settle(): Promise<void> {
  for (let i = 0; i < 6; i++) await flush();
}

function mount(): { app: ExplorerApp; calls: Array<{ url: string; body: any }> } {
  document.body.innerHTML = PAGE_HTML;
  const { calls } = installFetchStub();
  const app = new ExplorerApp(document, new ApiClient(''));
  app.init();
  return { app, calls };
}

function setControl(key: string, value: string): void {
  const input = document.querySelector<HTMLInputElement>(`[data-testid="control-${key}"]`)!;
  input.value = value;
  input.dispatchEvent(new Event('input', { bubbles: true }));
}

describe('explorer app', () => {
  beforeEach(() => {
    window.history.replaceState(null, '', '/');
  });

  it('issues the default scenario request on first load', async () => {
    const { calls } = mount();
    await settle();
    const first = calls.find((c) => c.url.includes('/api/simulate'));
    expect(first).toBeDefined();
    expect(first!.body.c0).toBe(1000);
    expect(first!.body.sigma0).toBe(20);
    expect(document.getElementById('regime-badge')!.textContent).toBe('SmoothBubble');
  });

  it('restores a URL-encoded scenario on load', async () => {
    window.history.replaceState(null, '', '/?c0=1012&sigma0=20');
    const { calls } = mount();
    await settle();
    const first = calls.find((c) => c.url.includes('/api/simulate'));
    expect(first!.body.c0).toBe(1012);
    expect(document.getElementById('regime-badge')!.textContent).toBe('UnboundedGrowth');
    const c0 = document.querySelector<HTMLInputElement>('[data-testid="control-c0"]')!;
    expect(Number(c0.value)).toBe(1012);
  });

  it('shows the UnboundedGrowth badge after moving c0 to 1012', async () => {
    mount();
    await settle();
    setControl('c0', '1012');
    await sleep(DEBOUNCE_MS + 60);
    await settle();
    expect(document.getElementById('regime-badge')!.textContent).toBe('UnboundedGrowth');
    expect(document.getElementById('termination-label')!.textContent).toContain('HorizonReached');
    // scenario state is mirrored into the URL
    expect(decodeScenario(window.location.search).c0).toBe(1012);
  });

  it('debounces control changes into a single request', async () => {
    const { calls } = mount();
    await settle();
    const before = calls.filter((c) => c.url.includes('/api/simulate')).length;
    setControl('c0', '1005');
    setControl('c0', '1008');
    setControl('c0', '1012');
    await sleep(DEBOUNCE_MS + 60);
    await settle();
    const after = calls.filter((c) => c.url.includes('/api/simulate')).length;
    expect(after - before).toBe(1);
  });

  it('renders a gap marker at each detected gap step for the double-bubble run', async () => {
    mount();
    await settle();
    setControl('sigma0', '17');
    await sleep(DEBOUNCE_MS + 60);
    await settle();
    const chart = document.getElementById('chart-capital')!;
    const markers = Array.from(chart.querySelectorAll('[data-gap-step]')).map((el) =>
      Number(el.getAttribute('data-gap-step')),
    );
    expect(markers).toEqual([124, 132, 138]);
    expect(document.getElementById('regime-badge')!.textContent).toBe('MultiBubble');
  });

  it('loads a clicked sweep cell into the controls and re-simulates', async () => {
    const { calls } = mount();
    await settle();
    document.getElementById('sweep-run')!.click();
    await settle();
    const panel = document.getElementById('sweep-panel')!;
    expect(panel.hidden).toBe(false);
    const cells = panel.querySelectorAll('[data-cell-index]');
    expect(cells.length).toBe(3);
    const before = calls.filter((c) => c.url.includes('/api/simulate')).length;
    (cells[2] as SVGElement).dispatchEvent(new Event('click', { bubbles: true }));
    await settle();
    const c0Input = document.querySelector<HTMLInputElement>('[data-testid="control-c0"]')!;
    expect(Number(c0Input.value)).toBe(1012);
    const simCalls = calls.filter((c) => c.url.includes('/api/simulate'));
    expect(simCalls.length).toBe(before + 1);
    expect(simCalls[simCalls.length - 1].body.c0).toBe(1012);
    expect(document.getElementById('regime-badge')!.textContent).toBe('UnboundedGrowth');
  });

  it('draws the critical guide and removes it when lambda is zero', async () => {
    mount();
    await settle();
    expect(document.getElementById('chart-capital')!.innerHTML).toContain('critical-guide');
    expect(document.getElementById('critical-readout')!.textContent).toContain('2004');
    setControl('lambda', '0');
    await sleep(DEBOUNCE_MS + 60);
    await settle();
    expect(document.getElementById('critical-readout')!.textContent).toBe('');
    expect(document.getElementById('chart-capital')!.innerHTML).not.toContain('critical-guide');
  });

  it('keeps the previous chart and highlights the field on a service error', async () => {
    mount();
    await settle();
    const chartBefore = document.getElementById('chart-capital')!.innerHTML;
    expect(chartBefore).toContain('polyline');
    // number input: unlike sliders it does not clamp, so the bad value
    // reaches the service and comes back as a field error
    setControl('gap_threshold', '-1');
    await sleep(DEBOUNCE_MS + 60);
    await settle();
    const banner = document.getElementById('banner')!;
    expect(banner.hidden).toBe(false);
    expect(banner.textContent).toContain('gap_threshold');
    const marked = document.querySelector<HTMLElement>('.control-error');
    expect(marked?.dataset.field).toBe('gap_threshold');
    expect(document.getElementById('chart-capital')!.innerHTML).toBe(chartBefore);
  });

  it('overlays pinned runs on the capital chart', async () => {
    mount();
    await settle();
    document.getElementById('pin-button')!.click();
    setControl('c0', '1012');
    await sleep(DEBOUNCE_MS + 60);
    await settle();
    const chart = document.getElementById('chart-capital')!;
    expect(chart.querySelectorAll('polyline').length).toBe(2);
    expect(document.querySelectorAll('#pin-list li').length).toBe(1);
  });

  it('controls display the effective scenario echoed by the service', async () => {
    mount();
    await settle();
    // m0 and bankruptcy_floor are omitted from the request; the echo fills them
    const m0 = document.querySelector<HTMLInputElement>('[data-testid="control-m0"]')!;
    expect(Number(m0.value)).toBe(5);
    const floor = document.querySelector<HTMLInputElement>('[data-testid="control-bankruptcy_floor"]')!;
    expect(Number(floor.value)).toBe(100);
  });

  it('discards stale responses by sequence', async () => {
    document.body.innerHTML = PAGE_HTML;
    let release: (() => void) | null = null;
    const slowFirst = new Promise<void>((resolve) => {
      release = resolve;
    });
    let call = 0;
    globalThis.fetch = (async (input: RequestInfo | URL) => {
      const url = String(input);
      if (url.includes('/api/simulate')) {
        call += 1;
        if (call === 1) {
          await slowFirst;
          return jsonResponse(200, simSmooth());
        }
        return jsonResponse(200, simGrowth());
      }
      return jsonResponse(400, { error: { code: 'UndefinedCritical', path: 'lambda', message: '' } });
    }) as typeof fetch;
    const app = new ExplorerApp(document, new ApiClient(''));
    app.init();
    await flush();
    const second = app.runSimulate();
    await settle();
    release!();
    await second;
    await settle();
    expect(document.getElementById('regime-badge')!.textContent).toBe('UnboundedGrowth');
  });
});
