import type { AbilitySeriesModel } from "./viewmodel";

const COLORS = ["#2563eb", "#dc2626", "#059669", "#d97706"];

/** Render line series as a dependency-free inline SVG. */
export function renderLineChart(
  model: AbilitySeriesModel,
  width = 420,
  height = 220,
  threshold?: number,
): SVGSVGElement {
  const svg = document.createElementNS("http://www.w3.org/2000/svg", "svg");
  svg.setAttribute("width", String(width));
  svg.setAttribute("height", String(height));
  svg.setAttribute("class", "ability-chart");

  const pad = { left: 34, right: 10, top: 10, bottom: 22 };
  const innerW = width - pad.left - pad.right;
  const innerH = height - pad.top - pad.bottom;

  const allValues = model.series.flatMap((s) => s.values);
  if (threshold !== undefined) allValues.push(threshold);
  const maxSteps = Math.max(2, ...model.series.map((s) => s.values.length));
  let lo = Math.min(0, ...allValues);
  let hi = Math.max(1, ...allValues);
  if (hi === lo) hi = lo + 1;

  const x = (step: number) => pad.left + (step / (maxSteps - 1)) * innerW;
  const y = (value: number) => pad.top + innerH - ((value - lo) / (hi - lo)) * innerH;

  const axis = document.createElementNS(svg.namespaceURI, "path");
  axis.setAttribute(
    "d",
    `M ${pad.left} ${pad.top} V ${pad.top + innerH} H ${pad.left + innerW}`,
  );
  axis.setAttribute("stroke", "#9ca3af");
  axis.setAttribute("fill", "none");
  svg.appendChild(axis);

  if (threshold !== undefined) {
    const line = document.createElementNS(svg.namespaceURI, "line");
    line.setAttribute("x1", String(pad.left));
    line.setAttribute("x2", String(pad.left + innerW));
    line.setAttribute("y1", String(y(threshold)));
    line.setAttribute("y2", String(y(threshold)));
    line.setAttribute("stroke", "#6b7280");
    line.setAttribute("stroke-dasharray", "4 3");
    line.setAttribute("class", "threshold-line");
    svg.appendChild(line);
  }

  model.series.forEach((series, index) => {
    if (series.values.length === 0) return;
    const points = series.values
      .map((v, step) => `${step === 0 ? "M" : "L"} ${x(step).toFixed(1)} ${y(v).toFixed(1)}`)
      .join(" ");
    const path = document.createElementNS(svg.namespaceURI, "path");
    path.setAttribute("d", points);
    path.setAttribute("fill", "none");
    path.setAttribute("stroke", COLORS[index % COLORS.length]);
    path.setAttribute("stroke-width", "2");
    path.setAttribute("data-series", series.name);
    svg.appendChild(path);

    const label = document.createElementNS(svg.namespaceURI, "text");
    label.setAttribute("x", String(pad.left + 6 + index * 110));
    label.setAttribute("y", String(height - 6));
    label.setAttribute("fill", COLORS[index % COLORS.length]);
    label.setAttribute("font-size", "11");
    label.textContent = series.name;
    svg.appendChild(label);
  });

  return svg;
}
