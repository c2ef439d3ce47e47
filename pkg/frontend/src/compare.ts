/**
 * Before/after compare slider. The geometry is pure so it can be tested
 * headless; createCompareSlider is a thin DOM shell around it.
 */

export function clamp01(x: number): number {
  if (!Number.isFinite(x)) return 0;
  return Math.min(1, Math.max(0, x));
}

/** Divider fraction for a pointer at clientX over the element's box. */
export function fractionFromPointer(
  clientX: number, rect: { left: number; width: number },
): number {
  if (rect.width <= 0) return 0;
  return clamp01((clientX - rect.left) / rect.width);
}

/** inset() clip for the after-image so exactly `fraction` of it shows. */
export function clipForFraction(fraction: number): string {
  const hidden = (1 - clamp01(fraction)) * 100;
  return `inset(0 ${hidden.toFixed(2)}% 0 0)`;
}

export interface CompareSlider {
  root: HTMLElement;
  setFraction(fraction: number): void;
  getFraction(): number;
}

export function createCompareSlider(
  doc: Document, beforeUrl: string, afterUrl: string,
): CompareSlider {
  const root = doc.createElement("div");
  root.className = "compare";

  const before = doc.createElement("img");
  before.src = beforeUrl;
  before.alt = "before";
  const after = doc.createElement("img");
  after.src = afterUrl;
  after.alt = "after";
  after.className = "compare-after";
  const divider = doc.createElement("div");
  divider.className = "compare-divider";
  root.append(before, after, divider);

  let fraction = 0.5;
  const apply = () => {
    after.style.clipPath = clipForFraction(fraction);
    divider.style.left = `${(fraction * 100).toFixed(2)}%`;
  };
  apply();

  let dragging = false;
  const move = (ev: PointerEvent) => {
    fraction = fractionFromPointer(ev.clientX, root.getBoundingClientRect());
    apply();
  };
  root.addEventListener("pointerdown", (ev) => {
    dragging = true;
    root.setPointerCapture(ev.pointerId);
    move(ev);
  });
  root.addEventListener("pointermove", (ev) => {
    if (dragging) move(ev);
  });
  root.addEventListener("pointerup", () => {
    dragging = false;
  });

  return {
    root,
    setFraction(f: number) {
      fraction = clamp01(f);
      apply();
    },
    getFraction: () => fraction,
  };
}
