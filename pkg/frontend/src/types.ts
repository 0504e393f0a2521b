/** Payload shapes of the simulation service API. */

export interface ScenarioFields {
  c0: number;
  kappa: number;
  lambda: number;
  T: number;
  dt: number;
  sigma0: number;
  realized: number | number[];
  horizon: number;
  m0?: number;
  impact_model?: 'linear' | 'sqrt';
  eps_deg?: number;
  overflow_cap?: number;
  gap_threshold?: number;
  peak_prominence?: number;
  bankruptcy_floor?: number;
}

export interface StatePoint {
  step: number;
  t: number;
  capital: number;
  avg_maturity: number;
  implied: number;
  vega: number;
}

export interface BreakdownPoint {
  step: number;
  aged_vega: number;
  new_vega: number;
  trade: number;
  realized_pnl: number;
  implied_pnl: number;
  total_pnl: number;
  denom_margin: number;
}

export interface PeakEvent {
  step: number;
  value: number;
  prominence: number;
}

export interface GapEvent {
  step: number;
  rel_change: number;
}

export interface RegimeReport {
  regime: string;
  peaks: PeakEvent[];
  gaps: GapEvent[];
  bankruptcy_step: number | null;
  final_capital: number;
}

export interface SimulateResponse {
  scenario: ScenarioFields;
  termination: string;
  steps: number;
  report: RegimeReport;
  states: StatePoint[];
  breakdowns: BreakdownPoint[];
}

export interface SweepAxis {
  name: string;
  values: number[];
}

export interface SweepCell {
  values: number[];
  regime: string;
  termination: string;
  final_capital: number;
  peak_value: number | null;
  gap_count: number;
  bankruptcy_step: number | null;
}

export interface SweepResponse {
  scenario: ScenarioFields;
  axes: SweepAxis[];
  cells: SweepCell[];
}

export interface CriticalResponse {
  kappa: number;
  lambda: number;
  dt: number;
  maturity?: number;
  approx: number;
  exact: number | null;
}

export interface ApiErrorBody {
  error: { code: string; path: string; message: string };
}

export interface PinnedRun {
  label: string;
  color: string;
  states: StatePoint[];
}
