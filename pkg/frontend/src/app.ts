/** Page wiring: one spec form, one active job, a compare view, and history. */

import { MakeupClient, streamEvents, type JobEvent } from "./api.js";
import { createCompareSlider } from "./compare.js";
import {
  addTarget,
  clampInt,
  defaultForm,
  formToSpec,
  removeTarget,
  submitProblems,
  updateTarget,
  type SpecForm,
} from "./controls.js";
import { JobHistory } from "./history.js";
import { LIMITS, REGIONS, specSummary } from "./spec.js";

const client = new MakeupClient("");
const history = new JobHistory(window.localStorage);
const form: SpecForm = defaultForm();

const $ = <T extends HTMLElement>(id: string): T => {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element: #${id}`);
  return el as T;
};

const fileOf = (input: HTMLInputElement): Blob | undefined => input.files?.[0] ?? undefined;

function renderProblems(): void {
  const problems = submitProblems(
    form,
    fileOf($<HTMLInputElement>("image")) !== undefined,
    fileOf($<HTMLInputElement>("reference")) !== undefined,
    fileOf($<HTMLInputElement>("reference-labels")) !== undefined,
  );
  $<HTMLUListElement>("problems").replaceChildren(
    ...problems.map((p) => {
      const li = document.createElement("li");
      li.textContent = p;
      return li;
    }),
  );
  $<HTMLButtonElement>("submit").disabled = problems.length > 0;
}

function renderTargets(): void {
  const container = $<HTMLDivElement>("targets");
  container.replaceChildren(
    ...form.targets.map((target) => {
      const row = document.createElement("div");
      row.className = "target-row";

      const label = document.createElement("span");
      label.textContent = target.region;

      const color = document.createElement("input");
      color.type = "color";
      color.value = target.color;
      color.addEventListener("input", () => {
        form.targets = updateTarget(form.targets, target.region, { color: color.value });
        renderProblems();
      });

      const alpha = document.createElement("input");
      alpha.type = "range";
      alpha.min = "0";
      alpha.max = "1";
      alpha.step = "0.05";
      alpha.value = String(target.alpha ?? 1);
      alpha.addEventListener("input", () => {
        form.targets = updateTarget(form.targets, target.region, { alpha: Number(alpha.value) });
        renderProblems();
      });

      const remove = document.createElement("button");
      remove.type = "button";
      remove.textContent = "remove";
      remove.addEventListener("click", () => {
        form.targets = removeTarget(form.targets, target.region);
        renderTargets();
        renderProblems();
      });

      row.append(label, color, alpha, remove);
      return row;
    }),
  );
}

function renderHistory(): void {
  $<HTMLUListElement>("history").replaceChildren(
    ...history.list().map((entry) => {
      const li = document.createElement("li");
      li.textContent = `${entry.submittedAt.slice(0, 19)}  ${entry.summary}  [${entry.state}]`;
      return li;
    }),
  );
}

function showProgress(event: JobEvent): void {
  $<HTMLProgressElement>("progress").value = event.fraction;
  $<HTMLSpanElement>("stage").textContent =
    event.message ? `${event.stage}: ${event.message}` : event.stage;
}

async function submit(): Promise<void> {
  const image = fileOf($<HTMLInputElement>("image"));
  if (!image) return;
  const spec = formToSpec(form);
  const button = $<HTMLButtonElement>("submit");
  button.disabled = true;
  try {
    const { id } = await client.submit(spec, {
      image,
      labels: fileOf($<HTMLInputElement>("labels")),
      reference: fileOf($<HTMLInputElement>("reference")),
      referenceLabels: fileOf($<HTMLInputElement>("reference-labels")),
    });
    history.append({
      id,
      submittedAt: new Date().toISOString(),
      summary: specSummary(spec),
      state: "queued",
    });
    renderHistory();
    streamEvents(client, id, {
      onEvent: showProgress,
      onEnd: (reason) => {
        history.setState(id, reason);
        renderHistory();
        button.disabled = false;
        if (reason === "done") {
          const viewer = $<HTMLDivElement>("result");
          viewer.replaceChildren(
            createCompareSlider(document, URL.createObjectURL(image), client.resultUrl(id)).root,
          );
        }
      },
    });
  } catch (err) {
    $<HTMLSpanElement>("stage").textContent = err instanceof Error ? err.message : String(err);
    button.disabled = false;
  }
}

function bindNumber(id: string, min: number, max: number, set: (value: number) => void): void {
  const input = $<HTMLInputElement>(id);
  input.addEventListener("change", () => {
    const value = clampInt(Number(input.value), min, max);
    input.value = String(value);
    set(value);
    renderProblems();
  });
}

export function start(): void {
  const regionSelect = $<HTMLSelectElement>("region");
  regionSelect.replaceChildren(
    ...REGIONS.filter((r) => r !== "background").map((region) => {
      const option = document.createElement("option");
      option.value = region;
      option.textContent = region;
      return option;
    }),
  );
  regionSelect.value = "lip";

  $<HTMLButtonElement>("add-target").addEventListener("click", () => {
    try {
      form.targets = addTarget(form.targets, regionSelect.value);
    } catch {
      return; // duplicate region; the row is already there
    }
    renderTargets();
    renderProblems();
  });

  $<HTMLInputElement>("concepts").addEventListener("change", (ev) => {
    const raw = (ev.target as HTMLInputElement).value;
    form.concepts = raw.split(",").map((s) => s.trim()).filter(Boolean);
    renderProblems();
  });

  bindNumber("t-star", LIMITS.tStar.min, LIMITS.tStar.max, (v) => {
    form.tStar = v;
  });
  bindNumber("inversion-steps", 1, LIMITS.tStar.max, (v) => {
    form.inversionSteps = v;
  });
  bindNumber("reverse-steps", 1, LIMITS.tStar.max, (v) => {
    form.reverseSteps = v;
  });

  const lambda = $<HTMLInputElement>("lambda");
  lambda.addEventListener("input", () => {
    form.lambda = Number(lambda.value);
    renderProblems();
  });
  const backend = $<HTMLSelectElement>("backend");
  backend.addEventListener("change", () => {
    form.backend = backend.value as SpecForm["backend"];
    renderProblems();
  });

  for (const id of ["image", "labels", "reference", "reference-labels"]) {
    $<HTMLInputElement>(id).addEventListener("change", renderProblems);
  }
  $<HTMLButtonElement>("submit").addEventListener("click", () => void submit());

  void client.backends().then(({ backends, default: preset }) => {
    backend.replaceChildren(
      ...backends.map((b) => {
        const option = document.createElement("option");
        option.value = b.id;
        option.textContent = `${b.id}: ${b.description}`;
        return option;
      }),
    );
    backend.value = preset;
    form.backend = preset as SpecForm["backend"];
  });

  renderTargets();
  renderHistory();
  renderProblems();
}

if (typeof document !== "undefined" && document.readyState !== "loading") {
  start();
} else if (typeof document !== "undefined") {
  document.addEventListener("DOMContentLoaded", start);
}
