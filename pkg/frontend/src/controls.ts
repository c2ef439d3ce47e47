/**
 * Pure form logic for the spec editor: target rows, numeric clamping, and
 * assembling the wire document. DOM wiring lives in app.ts.
 */

import {
  DEFAULTS,
  REGIONS,
  validateSpec,
  type Backend,
  type ColorTarget,
  type SpecDocument,
} from "./spec.js";

export interface SpecForm {
  targets: ColorTarget[];
  concepts: string[];
  mainPrompt: string;
  lambda: number;
  applySteps: number;
  tStar: number;
  inversionSteps: number;
  reverseSteps: number;
  seed: number;
  debug: boolean;
  backend: "" | Backend; // "" = service default
}

export function defaultForm(): SpecForm {
  return {
    targets: [],
    concepts: [],
    mainPrompt: DEFAULTS.mainPrompt,
    lambda: DEFAULTS.lambda,
    applySteps: DEFAULTS.applySteps,
    tStar: DEFAULTS.tStar,
    inversionSteps: DEFAULTS.inversionSteps,
    reverseSteps: DEFAULTS.reverseSteps,
    seed: DEFAULTS.seed,
    debug: false,
    backend: "",
  };
}

export function clampInt(value: number, min: number, max: number): number {
  if (!Number.isFinite(value)) return min;
  return Math.min(max, Math.max(min, Math.round(value)));
}

/** One row per region; adding an existing or unknown region is rejected. */
export function addTarget(
  targets: ColorTarget[], region: string, color = "#b03a4a", alpha = DEFAULTS.alpha,
): ColorTarget[] {
  if (!(REGIONS as readonly string[]).includes(region)) {
    throw new Error(`unknown region: ${region}`);
  }
  if (targets.some((t) => t.region === region)) {
    throw new Error(`region already has a target: ${region}`);
  }
  return [...targets, { region, color, alpha }];
}

export function removeTarget(targets: ColorTarget[], region: string): ColorTarget[] {
  return targets.filter((t) => t.region !== region);
}

export function updateTarget(
  targets: ColorTarget[], region: string, patch: Partial<Omit<ColorTarget, "region">>,
): ColorTarget[] {
  return targets.map((t) => (t.region === region ? { ...t, ...patch } : t));
}

/** Wire document with server-default fields omitted, so submissions stay minimal. */
export function formToSpec(form: SpecForm): SpecDocument {
  const doc: SpecDocument = {};
  if (form.targets.length) doc.color_targets = form.targets.map((t) => ({ ...t }));
  if (form.concepts.length) doc.concepts = [...form.concepts];
  if (form.mainPrompt !== DEFAULTS.mainPrompt) doc.main_prompt = form.mainPrompt;
  if (form.lambda !== DEFAULTS.lambda) doc.lambda = form.lambda;
  if (form.applySteps !== DEFAULTS.applySteps) doc.apply_steps = form.applySteps;
  if (form.tStar !== DEFAULTS.tStar) doc.t_star = form.tStar;
  if (form.inversionSteps !== DEFAULTS.inversionSteps) doc.inversion_steps = form.inversionSteps;
  if (form.reverseSteps !== DEFAULTS.reverseSteps) doc.reverse_steps = form.reverseSteps;
  if (form.seed !== DEFAULTS.seed) doc.seed = form.seed;
  if (form.debug) doc.debug = true;
  if (form.backend) doc.backend = form.backend;
  return doc;
}

/** Everything blocking submission, including the uploads the spec rides with. */
export function submitProblems(
  form: SpecForm, hasImage: boolean, hasReference: boolean, hasReferenceLabels: boolean,
): string[] {
  const problems = validateSpec(formToSpec(form), hasReference);
  if (!hasImage) problems.unshift("choose a source image");
  if (hasReference !== hasReferenceLabels) {
    problems.push("reference photo and reference labels must come together");
  }
  return problems;
}
