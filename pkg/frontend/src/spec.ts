/**
 * Client-side mirror of the server's job-spec validation.
 *
 * The bounds here restate docs/spec-schema.json; the contract test keeps the
 * two in lockstep. Validating before submit gives field-level messages
 * without a round trip, but the server remains the authority.
 */

export interface ColorTarget {
  region: string;
  color: string;
  alpha?: number;
}

export interface SpecDocument {
  color_targets?: ColorTarget[];
  concepts?: string[];
  main_prompt?: string;
  lambda?: number;
  apply_steps?: number;
  t_star?: number;
  inversion_steps?: number;
  reverse_steps?: number;
  seed?: number;
  debug?: boolean;
  backend?: Backend;
}

export const REGIONS = [
  "background", "brow", "eye", "eyeshadow", "hair", "lip", "other", "skin",
] as const;
export type Region = (typeof REGIONS)[number];

export const BACKENDS = ["analytic", "toy"] as const;
export type Backend = (typeof BACKENDS)[number];

export const LIMITS = {
  alpha: { min: 0, max: 1 },
  lambda: { min: 0, max: 1 },
  applySteps: { min: 0, max: 1000 },
  tStar: { min: 1, max: 1000 },
  steps: { min: 1 }, // upper bound is the chosen t_star
  seed: { min: -2147483648, max: 2147483647 },
} as const;

export const DEFAULTS = {
  mainPrompt: "a photo of a woman",
  lambda: 0.15,
  applySteps: 2,
  tStar: 300,
  inversionSteps: 20,
  reverseSteps: 30,
  seed: 0,
  alpha: 1.0,
} as const;

const HEX_RE = /^#?[0-9a-fA-F]{6}$/;

export function isHexColor(value: string): boolean {
  return HEX_RE.test(value);
}

/** "#RRGGBB" with the hash, lowercased; throws on malformed input. */
export function normalizeHexColor(value: string): string {
  if (!isHexColor(value)) throw new Error(`not a #RRGGBB color: ${JSON.stringify(value)}`);
  return "#" + value.replace(/^#/, "").toLowerCase();
}

export interface Concept {
  text: string;
  weight: number;
}

/**
 * "glossy lips:0.6" -> { text, weight }. The weight hangs off the last colon
 * so prompts may themselves contain colons; no numeric suffix means 1.
 */
export function parseConcept(entry: string): Concept {
  const sep = entry.lastIndexOf(":");
  if (sep >= 0) {
    const suffix = entry.slice(sep + 1).trim();
    const weight = suffix === "" ? NaN : Number(suffix);
    if (Number.isFinite(weight)) {
      const text = entry.slice(0, sep).trim();
      if (!text) throw new Error(`concept needs text before the weight: ${JSON.stringify(entry)}`);
      return { text, weight };
    }
  }
  const text = entry.trim();
  if (!text) throw new Error("concept text is empty");
  return { text, weight: 1 };
}

const SPEC_KEYS = new Set([
  "color_targets", "concepts", "main_prompt", "lambda", "apply_steps",
  "t_star", "inversion_steps", "reverse_steps", "seed", "debug", "backend",
]);
const TARGET_KEYS = new Set(["region", "color", "alpha"]);

function isNum(value: unknown): value is number {
  return typeof value === "number" && Number.isFinite(value);
}

function isInt(value: unknown): value is number {
  return isNum(value) && Number.isInteger(value);
}

function checkInt(
  problems: string[], name: string, value: unknown, min: number, max: number,
): void {
  if (value === undefined) return;
  if (!isInt(value) || value < min || value > max) {
    problems.push(`${name}: expected an integer in [${min}, ${max}]`);
  }
}

/**
 * Problems with a spec document, empty when submittable. Values are checked
 * defensively so documents from JSON (history replay, hand-edited) get the
 * same verdicts the server would give. `hasReference` stands in for the
 * reference upload, which travels outside the spec JSON.
 */
export function validateSpec(doc: SpecDocument, hasReference = false): string[] {
  const problems: string[] = [];
  const raw = doc as Record<string, unknown>;

  for (const key of Object.keys(raw)) {
    if (!SPEC_KEYS.has(key)) problems.push(`unknown spec field: ${key}`);
  }

  const targets = raw.color_targets;
  if (targets !== undefined && !Array.isArray(targets)) {
    problems.push("color_targets: expected an array");
  } else {
    for (const [i, entry] of ((targets as ColorTarget[] | undefined) ?? []).entries()) {
      if (typeof entry !== "object" || entry === null) {
        problems.push(`color_targets[${i}]: expected an object`);
        continue;
      }
      for (const key of Object.keys(entry)) {
        if (!TARGET_KEYS.has(key)) problems.push(`color_targets[${i}]: unknown field ${key}`);
      }
      if (typeof entry.region !== "string" || !(REGIONS as readonly string[]).includes(entry.region)) {
        problems.push(`color_targets[${i}].region: expected one of ${REGIONS.join(", ")}`);
      }
      if (typeof entry.color !== "string" || !isHexColor(entry.color)) {
        problems.push(`color_targets[${i}].color: expected #RRGGBB`);
      }
      const alpha = entry.alpha;
      if (alpha !== undefined && !(isNum(alpha) && alpha >= LIMITS.alpha.min && alpha <= LIMITS.alpha.max)) {
        problems.push(`color_targets[${i}].alpha: expected a number in [0, 1]`);
      }
    }
  }

  const concepts = raw.concepts;
  if (concepts !== undefined && !Array.isArray(concepts)) {
    problems.push("concepts: expected an array of 'text:weight' strings");
  } else {
    for (const [i, entry] of ((concepts as string[] | undefined) ?? []).entries()) {
      if (typeof entry !== "string") {
        problems.push(`concepts[${i}]: expected a string`);
        continue;
      }
      try {
        parseConcept(entry);
      } catch (err) {
        problems.push(`concepts[${i}]: ${(err as Error).message}`);
      }
    }
  }

  const prompt = raw.main_prompt;
  if (prompt !== undefined && (typeof prompt !== "string" || prompt.trim() === "")) {
    problems.push("main_prompt: expected a nonempty string");
  }
  const lam = raw.lambda;
  if (lam !== undefined && !(isNum(lam) && lam >= LIMITS.lambda.min && lam <= LIMITS.lambda.max)) {
    problems.push("lambda: expected a number in [0, 1]");
  }

  checkInt(problems, "apply_steps", raw.apply_steps, LIMITS.applySteps.min, LIMITS.applySteps.max);
  checkInt(problems, "t_star", raw.t_star, LIMITS.tStar.min, LIMITS.tStar.max);
  const tStar = isInt(raw.t_star) ? raw.t_star : DEFAULTS.tStar;
  checkInt(problems, "inversion_steps", raw.inversion_steps, LIMITS.steps.min, tStar);
  checkInt(problems, "reverse_steps", raw.reverse_steps, LIMITS.steps.min, tStar);
  checkInt(problems, "seed", raw.seed, LIMITS.seed.min, LIMITS.seed.max);

  if (raw.debug !== undefined && typeof raw.debug !== "boolean") {
    problems.push("debug: expected a boolean");
  }
  const backend = raw.backend;
  if (backend !== undefined &&
      (typeof backend !== "string" || !(BACKENDS as readonly string[]).includes(backend))) {
    problems.push(`backend: expected one of ${BACKENDS.join(", ")}`);
  }

  const hasTargets = Array.isArray(targets) && targets.length > 0;
  const hasConcepts = Array.isArray(concepts) && concepts.length > 0;
  if (!hasTargets && !hasConcepts && !hasReference) {
    problems.push("spec requests no edit: add a color target, a concept, or a reference photo");
  }
  return problems;
}

/** One-line description for history rows, e.g. "lip #b03a4a +1 concept (toy)". */
export function specSummary(doc: SpecDocument): string {
  const parts: string[] = [];
  for (const target of doc.color_targets ?? []) {
    parts.push(`${target.region} ${normalizeHexColor(target.color)}`);
  }
  const concepts = doc.concepts?.length ?? 0;
  if (concepts > 0) parts.push(`+${concepts} concept${concepts > 1 ? "s" : ""}`);
  if (parts.length === 0) parts.push("reference transfer");
  return `${parts.join(", ")} (${doc.backend ?? "toy"})`;
}
