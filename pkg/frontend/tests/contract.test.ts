/**
 * The client validator, the published schema, and the constants baked into
 * src/spec.ts must all tell the same story about the wire format.
 */

import { readFileSync } from "node:fs";

import AjvImport from "ajv";
import { describe, expect, it } from "vitest";

import { BACKENDS, DEFAULTS, LIMITS, REGIONS, validateSpec, type SpecDocument } from "../src/spec.js";

const AjvClass = (AjvImport as unknown as { default?: typeof AjvImport }).default ?? AjvImport;
const schema = JSON.parse(
  readFileSync(new URL("../../docs/spec-schema.json", import.meta.url), "utf-8"),
) as Record<string, any>;
const ajv = new AjvClass({ allowUnionTypes: true });
const schemaValid = ajv.compile(schema);
const props = schema.properties;

describe("constants mirror the schema", () => {
  it("regions and backends", () => {
    expect([...REGIONS]).toEqual(props.color_targets.items.properties.region.enum);
    expect([...BACKENDS]).toEqual(props.backend.enum);
  });

  it("numeric bounds", () => {
    expect(LIMITS.alpha).toMatchObject({
      min: props.color_targets.items.properties.alpha.minimum,
      max: props.color_targets.items.properties.alpha.maximum,
    });
    expect(LIMITS.lambda).toMatchObject({
      min: props.lambda.minimum,
      max: props.lambda.maximum,
    });
    expect(LIMITS.applySteps).toMatchObject({
      min: props.apply_steps.minimum,
      max: props.apply_steps.maximum,
    });
    expect(LIMITS.tStar).toMatchObject({
      min: props.t_star.minimum,
      max: props.t_star.maximum,
    });
    expect(LIMITS.seed).toMatchObject({
      min: props.seed.minimum,
      max: props.seed.maximum,
    });
  });

  it("defaults", () => {
    expect(DEFAULTS.mainPrompt).toBe(props.main_prompt.default);
    expect(DEFAULTS.lambda).toBe(props.lambda.default);
    expect(DEFAULTS.applySteps).toBe(props.apply_steps.default);
    expect(DEFAULTS.tStar).toBe(props.t_star.default);
    expect(DEFAULTS.inversionSteps).toBe(props.inversion_steps.default);
    expect(DEFAULTS.reverseSteps).toBe(props.reverse_steps.default);
    expect(DEFAULTS.seed).toBe(props.seed.default);
    expect(DEFAULTS.alpha).toBe(props.color_targets.items.properties.alpha.default);
  });
});

// Structural documents where the schema and the client validator must agree.
// Cross-field rules (steps vs t_star, the no-edit rule) are client/server
// territory; every document here includes a color target and default steps.
const CATALOG: Array<[string, unknown, boolean]> = [
  ["minimal lip job", { color_targets: [{ region: "lip", color: "#B03A4A" }] }, true],
  [
    "kitchen sink",
    {
      color_targets: [{ region: "skin", color: "c8a288", alpha: 0.5 }],
      concepts: ["glossy lips:0.6", "matte finish"],
      main_prompt: "portrait",
      lambda: 0.3,
      apply_steps: 4,
      t_star: 60,
      inversion_steps: 6,
      reverse_steps: 8,
      seed: -7,
      debug: true,
      backend: "toy",
    },
    true,
  ],
  ["unknown field", { color_targets: [{ region: "lip", color: "#B03A4A" }], sparkle: 1 }, false],
  ["unknown region", { color_targets: [{ region: "cheek", color: "#B03A4A" }] }, false],
  ["bad hex", { color_targets: [{ region: "lip", color: "#B03A" }] }, false],
  ["alpha range", { color_targets: [{ region: "lip", color: "#B03A4A", alpha: 1.5 }] }, false],
  ["target extras", { color_targets: [{ region: "lip", color: "#B03A4A", glitter: true }] }, false],
  ["t_star high", { color_targets: [{ region: "lip", color: "#B03A4A" }], t_star: 1001 }, false],
  ["t_star fractional", { color_targets: [{ region: "lip", color: "#B03A4A" }], t_star: 10.5 }, false],
  ["seed overflow", { color_targets: [{ region: "lip", color: "#B03A4A" }], seed: 2 ** 31 }, false],
  ["backend enum", { color_targets: [{ region: "lip", color: "#B03A4A" }], backend: "quantum" }, false],
  ["debug type", { color_targets: [{ region: "lip", color: "#B03A4A" }], debug: "yes" }, false],
  ["lambda type", { color_targets: [{ region: "lip", color: "#B03A4A" }], lambda: "low" }, false],
  ["blank prompt", { color_targets: [{ region: "lip", color: "#B03A4A" }], main_prompt: "  " }, false],
  ["concepts not a list", { color_targets: [{ region: "lip", color: "#B03A4A" }], concepts: "x" }, false],
];

describe("schema and client validator agree", () => {
  it.each(CATALOG)("%s", (_name, doc, valid) => {
    expect(schemaValid(doc)).toBe(valid);
    const problems = validateSpec(doc as SpecDocument);
    expect(problems.length === 0).toBe(valid);
  });
});
