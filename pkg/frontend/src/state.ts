/** Scenario defaults, control metadata, and URL mirroring. */

import type { ScenarioFields } from './types.js';

export const DEFAULT_SCENARIO: ScenarioFields = {
  c0: 1000,
  kappa: 0.1,
  lambda: 0.05,
  T: 5,
  dt: 0.01,
  sigma0: 20,
  realized: 20,
  horizon: 1000,
};

export interface FieldSpec {
  key: keyof ScenarioFields;
  label: string;
  kind: 'slider' | 'number' | 'select';
  min?: number;
  max?: number;
  step?: number;
  options?: string[];
}

/** One control per scenario field; slider bounds are presentation choices. */
export const FIELD_SPECS: FieldSpec[] = [
  { key: 'c0', label: 'initial capital (M)', kind: 'slider', min: 100, max: 3000, step: 1 },
  { key: 'kappa', label: 'exposure fraction', kind: 'slider', min: 0.01, max: 0.5, step: 0.01 },
  { key: 'lambda', label: 'impact per M traded', kind: 'slider', min: 0, max: 0.2, step: 0.005 },
  { key: 'T', label: 'standard maturity (y)', kind: 'slider', min: 1, max: 10, step: 0.5 },
  { key: 'dt', label: 'step length (y)', kind: 'slider', min: 0.005, max: 0.1, step: 0.005 },
  { key: 'sigma0', label: 'initial implied', kind: 'slider', min: 0, max: 40, step: 0.5 },
  { key: 'realized', label: 'realized mark', kind: 'slider', min: 0, max: 40, step: 0.5 },
  { key: 'm0', label: 'initial avg maturity (y)', kind: 'number', min: 0.01, step: 0.01 },
  { key: 'horizon', label: 'steps', kind: 'number', min: 1, step: 1 },
  { key: 'impact_model', label: 'impact model', kind: 'select', options: ['linear', 'sqrt'] },
  { key: 'gap_threshold', label: 'gap threshold', kind: 'number', min: 0.01, step: 0.01 },
  { key: 'peak_prominence', label: 'peak prominence', kind: 'number', min: 0.01, step: 0.01 },
  { key: 'eps_deg', label: 'degeneracy guard', kind: 'number', min: 0 },
  { key: 'overflow_cap', label: 'overflow cap (M)', kind: 'number', min: 1 },
  { key: 'bankruptcy_floor', label: 'bankruptcy floor (M)', kind: 'number', min: 0 },
];

const NUMERIC_KEYS = FIELD_SPECS.filter((s) => s.kind !== 'select').map((s) => s.key);

/** Scenario -> query string (sequences are not URL-encodable and are skipped). */
export function encodeScenario(fields: Partial<ScenarioFields>): string {
  const params = new URLSearchParams();
  for (const spec of FIELD_SPECS) {
    const value = fields[spec.key];
    if (value === undefined || Array.isArray(value)) continue;
    params.set(spec.key, String(value));
  }
  return params.toString();
}

/** Query string -> partial scenario; malformed entries are dropped. */
export function decodeScenario(query: string): Partial<ScenarioFields> {
  const params = new URLSearchParams(query);
  const out: Record<string, number | string> = {};
  for (const key of NUMERIC_KEYS) {
    const raw = params.get(key);
    if (raw === null) continue;
    const value = Number(raw);
    if (Number.isFinite(value)) out[key] = value;
  }
  const impact = params.get('impact_model');
  if (impact === 'linear' || impact === 'sqrt') out['impact_model'] = impact;
  return out as Partial<ScenarioFields>;
}

export function mergedScenario(overrides: Partial<ScenarioFields>): ScenarioFields {
  return { ...DEFAULT_SCENARIO, ...overrides };
}
