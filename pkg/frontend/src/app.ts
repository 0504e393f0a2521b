/** Explorer controller: wires controls, service calls, charts, pins, and the
 * sweep loop. The view never computes model quantities; it displays what the
 * service returns. */

import { ApiClient } from './api.js';
import type { SweepAxisRequest } from './api.js';
import { heatmap, lineChart, REGIME_COLORS, seriesOf } from './charts.js';
import { buildControls } from './controls.js';
import type { ControlsHandle } from './controls.js';
import { decodeScenario, encodeScenario, mergedScenario } from './state.js';
import type {
  CriticalResponse,
  PinnedRun,
  ScenarioFields,
  SimulateResponse,
  SweepResponse,
} from './types.js';

export const DEBOUNCE_MS = 150;
const PIN_COLORS = ['#c75146', '#2ca06c', '#9467bd', '#b8860b'];
const MAX_PINS = 4;

const AXIS_TO_FIELD: Record<string, keyof ScenarioFields> = {
  c0: 'c0',
  kappa: 'kappa',
  lambda: 'lambda',
  sigma0: 'sigma0',
  r_const: 'realized',
  dt: 'dt',
};

export class ExplorerApp {
  private controls!: ControlsHandle;
  private lastResponse: SimulateResponse | null = null;
  private lastSweep: SweepResponse | null = null;
  private lastCritical: CriticalResponse | null = null;
  private pins: PinnedRun[] = [];
  private debounceTimer: ReturnType<typeof setTimeout> | null = null;

  constructor(
    private doc: Document,
    private api: ApiClient,
  ) {}

  init(): void {
    this.controls = buildControls(this.el('controls'), () => this.scheduleSimulate());
    const fromUrl = decodeScenario(this.doc.defaultView?.location.search ?? '');
    this.controls.write(mergedScenario(fromUrl));
    this.el('pin-button').addEventListener('click', () => this.pinCurrent());
    this.el('sweep-run').addEventListener('click', () => this.runSweep());
    this.el('sweep-panel').addEventListener('click', (event) => this.onSweepClick(event));
    void this.runSimulate();
  }

  private el(id: string): HTMLElement {
    const node = this.doc.getElementById(id);
    if (!node) throw new Error(`missing #${id}`);
    return node;
  }

  private scheduleSimulate(): void {
    if (this.debounceTimer !== null) clearTimeout(this.debounceTimer);
    this.debounceTimer = setTimeout(() => {
      this.debounceTimer = null;
      void this.runSimulate();
    }, DEBOUNCE_MS);
  }

  async runSimulate(): Promise<void> {
    const fields = this.controls.read();
    const result = await this.api.simulate(fields);
    if (!result.ok) {
      if (!result.stale) this.showError(result.error.code, result.error.path, result.error.message);
      return;
    }
    this.lastResponse = result.data;
    this.clearError();
    // Controls display the effective scenario, defaults resolved.
    this.controls.write(result.data.scenario);
    this.syncUrl(result.data.scenario);
    this.renderResults();
    await this.refreshCritical(result.data.scenario);
    this.renderCapitalChart();
  }

  private async refreshCritical(scenario: ScenarioFields): Promise<void> {
    const result = await this.api.critical(scenario.kappa, scenario.lambda, scenario.m0, scenario.dt);
    if (result.ok) {
      this.lastCritical = result.data;
      const exact = result.data.exact;
      this.el('critical-readout').textContent =
        exact === null
          ? `critical capital ≈ ${fmt(result.data.approx)}`
          : `critical capital ${fmt(exact)} (≈ ${fmt(result.data.approx)})`;
    } else {
      if ('stale' in result && result.stale) return;
      this.lastCritical = null;
      this.el('critical-readout').textContent = '';
    }
  }

  private syncUrl(scenario: ScenarioFields): void {
    const win = this.doc.defaultView;
    if (!win?.history?.replaceState) return;
    win.history.replaceState(null, '', `?${encodeScenario(scenario)}`);
  }

  private showError(code: string, path: string, message: string): void {
    const banner = this.el('banner');
    banner.hidden = false;
    banner.textContent = `${code} (${path}): ${message}`;
    this.controls.highlight(path);
  }

  private clearError(): void {
    const banner = this.el('banner');
    banner.hidden = true;
    banner.textContent = '';
    this.controls.highlight(null);
  }

  private renderResults(): void {
    const data = this.lastResponse;
    if (!data) return;
    const badge = this.el('regime-badge');
    badge.textContent = data.report.regime;
    badge.style.backgroundColor = REGIME_COLORS[data.report.regime] ?? '#888888';
    const bankrupt = data.report.bankruptcy_step;
    this.el('termination-label').textContent =
      `${data.termination} after ${data.steps} steps` + (bankrupt !== null ? ` (wound down at step ${bankrupt})` : '');
    this.renderCapitalChart();
    this.el('chart-implied').innerHTML = lineChart({
      width: 720,
      height: 180,
      title: 'implied mark (vol points)',
      testId: 'chart-implied',
      series: [{ label: 'implied', color: '#b8860b', points: seriesOf(data.states, 'implied') }],
      gaps: data.report.gaps,
    });
    this.el('chart-maturity').innerHTML = lineChart({
      width: 720,
      height: 180,
      title: 'average maturity (years)',
      testId: 'chart-maturity',
      series: [{ label: 'maturity', color: '#2f7f6f', points: seriesOf(data.states, 'avg_maturity') }],
      gaps: data.report.gaps,
    });
  }

  private renderCapitalChart(): void {
    const data = this.lastResponse;
    if (!data) return;
    const series = [
      { label: 'capital', color: '#1f5fbf', points: seriesOf(data.states, 'capital') },
      ...this.pins.map((pin) => ({ label: pin.label, color: pin.color, points: seriesOf(pin.states, 'capital') })),
    ];
    const guideValue = this.lastCritical ? this.lastCritical.exact ?? this.lastCritical.approx : null;
    this.el('chart-capital').innerHTML = lineChart({
      width: 720,
      height: 260,
      title: 'capital (millions)',
      testId: 'chart-capital',
      series,
      gaps: data.report.gaps,
      peaks: data.report.peaks,
      guide: guideValue !== null ? { value: guideValue, label: 'critical capital' } : null,
    });
  }

  private pinCurrent(): void {
    const data = this.lastResponse;
    if (!data) return;
    if (this.pins.length >= MAX_PINS) this.pins.shift();
    const s = data.scenario;
    this.pins.push({
      label: `c0=${s.c0} σ0=${s.sigma0} λ=${s.lambda}`,
      color: PIN_COLORS[this.pins.length % PIN_COLORS.length],
      states: data.states,
    });
    this.renderPinList();
    this.renderCapitalChart();
  }

  private renderPinList(): void {
    const list = this.el('pin-list');
    list.innerHTML = '';
    this.pins.forEach((pin, i) => {
      const item = this.doc.createElement('li');
      const swatch = this.doc.createElement('span');
      swatch.className = 'pin-swatch';
      swatch.style.backgroundColor = pin.color;
      item.appendChild(swatch);
      item.appendChild(this.doc.createTextNode(pin.label));
      const remove = this.doc.createElement('button');
      remove.textContent = '×';
      remove.addEventListener('click', () => {
        this.pins.splice(i, 1);
        this.renderPinList();
        this.renderCapitalChart();
      });
      item.appendChild(remove);
      list.appendChild(item);
    });
  }

  private async runSweep(): Promise<void> {
    const name = (this.el('sweep-axis') as HTMLSelectElement).value;
    const lo = Number((this.el('sweep-lo') as HTMLInputElement).value);
    const hi = Number((this.el('sweep-hi') as HTMLInputElement).value);
    const count = Number((this.el('sweep-count') as HTMLInputElement).value);
    if (!Number.isFinite(lo) || !Number.isFinite(hi) || !Number.isInteger(count) || count < 2) {
      this.showError('InvalidAxis', 'axes', 'sweep needs numeric lo/hi and an integer count >= 2');
      return;
    }
    const axes: SweepAxisRequest[] = [{ name, lo, hi, count }];
    const result = await this.api.sweep(this.controls.read(), axes);
    if (!result.ok) {
      if (!result.stale) this.showError(result.error.code, result.error.path, result.error.message);
      return;
    }
    this.lastSweep = result.data;
    this.clearError();
    const panel = this.el('sweep-panel');
    panel.hidden = false;
    panel.innerHTML = heatmap({ width: 720, cellHeight: 34, axes: result.data.axes, cells: result.data.cells });
  }

  /** Clicking a heatmap cell loads that cell's scenario into the controls
   * and re-simulates: the explore loop. */
  private onSweepClick(event: Event): void {
    const target = event.target as Element | null;
    const rect = target?.closest?.('[data-cell-index]');
    if (!rect || !this.lastSweep) return;
    const index = Number(rect.getAttribute('data-cell-index'));
    const cell = this.lastSweep.cells[index];
    if (!cell) return;
    const updates: Partial<ScenarioFields> = {};
    this.lastSweep.axes.forEach((axis, i) => {
      const key = AXIS_TO_FIELD[axis.name];
      if (key) (updates as Record<string, number>)[key] = cell.values[i];
    });
    this.controls.write(updates);
    void this.runSimulate();
  }
}

function fmt(v: number): string {
  return Math.abs(v) >= 1000 ? v.toFixed(1) : v.toPrecision(6);
}
