/** Control inventory: every interactive widget and what it talks to.
 *
 * One row per control keeps the widget <-> wire mapping auditable: each
 * control owns exactly one widget kind and at most one wire effect
 * (a stream command kind or an HTTP endpoint; "local" controls only touch
 * client state).  The inventory test enumerates this table.
 */

export type WidgetKind =
  | "panel"
  | "button"
  | "canvas"
  | "list"
  | "file-input"
  | "button-group"
  | "toggle"
  | "display"
  | "slider"
  | "number-input"
  | "picker"
  | "text-input";

export interface ControlSpec {
  id: string;
  label: string;
  widget: WidgetKind;
  /** Stream command kind, "http:<endpoint>", or "local". */
  wire: string;
  hint?: string;
}

export const CONTROL_INVENTORY: ControlSpec[] = [
  {
    id: "palette-panel",
    label: "Brush palette",
    widget: "panel",
    wire: "local",
    hint: "manage prompt-mask pairs; swatch colors are display-only",
  },
  {
    id: "new-brush-button",
    label: "New brush",
    widget: "button",
    wire: "register_brush",
  },
  {
    id: "drawing-pad",
    label: "Drawing pad",
    widget: "canvas",
    wire: "update_mask",
    hint: "strokes are debounced into mask updates",
  },
  {
    id: "layer-selector",
    label: "Layer selection",
    widget: "list",
    wire: "local",
    hint: "one layer per brush; background layer is locked",
  },
  {
    id: "background-upload",
    label: "Background image",
    widget: "file-input",
    wire: "http:/background",
    hint: "triggers a stream flush; wrong sizes are rescaled client-side",
  },
  {
    id: "tool-picker",
    label: "Drawing tools",
    widget: "button-group",
    wire: "local",
    hint: "brush, eraser, bucket fill",
  },
  {
    id: "play-button",
    label: "Play / pause / step",
    widget: "toggle",
    wire: "play",
    hint: "pause maps to `pause`, single-step to `step_once`",
  },
  {
    id: "stream-display",
    label: "Live display",
    widget: "display",
    wire: "local",
    hint: "renders incoming frames with tick and palette version",
  },
  {
    id: "alpha-slider",
    label: "Mask alpha",
    widget: "slider",
    wire: "set_alpha",
    hint: "values below 0.95 rapidly skip early steps",
  },
  {
    id: "blur-slider",
    label: "Mask blur",
    widget: "slider",
    wire: "set_sigma",
  },
  {
    id: "seed-input",
    label: "Seed",
    widget: "number-input",
    wire: "set_seed",
  },
  {
    id: "target-picker",
    label: "Brush target",
    widget: "picker",
    wire: "register_brush",
    hint: "solid color or image; carried in the brush registration payload "
      + "so a text-prompt backend can slot in behind the same field",
  },
  {
    id: "strength-slider",
    label: "Brush strength",
    widget: "slider",
    wire: "set_strength",
    hint: "mix ratio toward the background target",
  },
  {
    id: "name-input",
    label: "Brush name",
    widget: "text-input",
    wire: "local",
    hint: "cosmetic only",
  },
];
