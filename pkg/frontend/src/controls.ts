/** Scenario controls: one input per field, built from FIELD_SPECS. */

import { FIELD_SPECS } from './state.js';
import type { FieldSpec } from './state.js';
import type { ScenarioFields } from './types.js';

export interface ControlsHandle {
  read(): Partial<ScenarioFields>;
  /** Update inputs without firing change callbacks (used for service echo). */
  write(fields: Partial<ScenarioFields>): void;
  highlight(key: string | null): void;
  element(key: string): HTMLInputElement | HTMLSelectElement | undefined;
}

export function buildControls(
  container: HTMLElement,
  onChange: () => void,
): ControlsHandle {
  const inputs = new Map<string, HTMLInputElement | HTMLSelectElement>();
  const readouts = new Map<string, HTMLElement>();
  let silent = false;

  for (const spec of FIELD_SPECS) {
    const row = document.createElement('label');
    row.className = 'control-row';
    row.dataset.field = spec.key;

    const name = document.createElement('span');
    name.className = 'control-label';
    name.textContent = spec.label;
    row.appendChild(name);

    let input: HTMLInputElement | HTMLSelectElement;
    if (spec.kind === 'select') {
      input = document.createElement('select');
      for (const option of spec.options ?? []) {
        const el = document.createElement('option');
        el.value = option;
        el.textContent = option;
        input.appendChild(el);
      }
    } else {
      input = document.createElement('input');
      input.type = spec.kind === 'slider' ? 'range' : 'number';
      if (spec.min !== undefined) input.min = String(spec.min);
      if (spec.max !== undefined) input.max = String(spec.max);
      if (spec.step !== undefined) input.step = String(spec.step);
    }
    input.name = spec.key;
    input.dataset.testid = `control-${spec.key}`;
    input.addEventListener('input', () => {
      if (silent) return;
      syncReadout(spec, input);
      onChange();
    });
    input.addEventListener('change', () => {
      if (silent) return;
      syncReadout(spec, input);
      onChange();
    });
    row.appendChild(input);

    const readout = document.createElement('span');
    readout.className = 'control-value';
    row.appendChild(readout);
    readouts.set(spec.key, readout);

    inputs.set(spec.key, input);
    container.appendChild(row);
  }

  function syncReadout(spec: FieldSpec, input: HTMLInputElement | HTMLSelectElement): void {
    const readout = readouts.get(spec.key);
    if (readout) readout.textContent = spec.kind === 'select' ? '' : input.value;
  }

  return {
    read(): Partial<ScenarioFields> {
      const out: Record<string, number | string> = {};
      for (const spec of FIELD_SPECS) {
        const input = inputs.get(spec.key)!;
        if (input.value === '') continue;
        if (spec.kind === 'select') {
          out[spec.key] = input.value;
        } else {
          const value = Number(input.value);
          if (Number.isFinite(value)) out[spec.key] = value;
        }
      }
      return out as Partial<ScenarioFields>;
    },
    write(fields: Partial<ScenarioFields>): void {
      silent = true;
      try {
        for (const spec of FIELD_SPECS) {
          const value = fields[spec.key];
          const input = inputs.get(spec.key)!;
          if (value === undefined || Array.isArray(value)) continue;
          input.value = String(value);
          syncReadout(spec, input);
        }
      } finally {
        silent = false;
      }
    },
    highlight(key: string | null): void {
      for (const row of Array.from(container.querySelectorAll<HTMLElement>('.control-row'))) {
        row.classList.toggle('control-error', key !== null && row.dataset.field === key);
      }
    },
    element(key: string) {
      return inputs.get(key);
    },
  };
}
