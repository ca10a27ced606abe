// Expansion panel view model: the editable clause tree access point.
//
// The panel is a pure function of the previewed tree. Each variation can be
// toggled off, each group can be switched between MUST and SHOULD, and
// emitTree() reassembles exactly what the user left enabled — the tree sent
// back to /search as the override plan.

import type { ClauseGroup, ClauseKind, ClauseTree, Tier } from "./types.js";

export interface VariationView {
  text: string;
  weight: number;
  tier: Tier;
  enabled: boolean;
}

export interface GroupView {
  /** stable handle for UI events, `${kind}-${index}` of the source tree */
  key: string;
  origin: ClauseGroup["origin"];
  kind: ClauseKind;
  boost: number;
  variations: VariationView[];
}

export interface ClausePanelModel {
  groups: GroupView[];
  /** true when the tree holds nothing but residual text groups */
  noEntitiesDetected: boolean;
}

export function buildClauseView(tree: ClauseTree): ClausePanelModel {
  const groups: GroupView[] = [];
  const push = (kind: ClauseKind, source: ClauseGroup[]) => {
    source.forEach((group, i) => {
      groups.push({
        key: `${kind}-${i}`,
        origin: group.origin,
        kind,
        boost: group.boost,
        variations: group.variations.map((v) => ({ ...v, enabled: true })),
      });
    });
  };
  push("must", tree.must);
  push("should", tree.should);
  return {
    groups,
    noEntitiesDetected: groups.every((g) => g.origin === "text"),
  };
}

/** Toggle one variation; returns a new model (views are immutable). */
export function toggleVariation(
  model: ClausePanelModel,
  groupKey: string,
  variationText: string,
): ClausePanelModel {
  return {
    ...model,
    groups: model.groups.map((g) =>
      g.key === groupKey
        ? {
            ...g,
            variations: g.variations.map((v) =>
              v.text === variationText ? { ...v, enabled: !v.enabled } : v,
            ),
          }
        : g,
    ),
  };
}

/** Switch a group between MUST and SHOULD. */
export function setGroupKind(
  model: ClausePanelModel,
  groupKey: string,
  kind: ClauseKind,
): ClausePanelModel {
  return {
    ...model,
    groups: model.groups.map((g) => (g.key === groupKey ? { ...g, kind } : g)),
  };
}

/**
 * Reassemble the edited tree. Groups whose variations are all disabled are
 * dropped entirely (a group must keep at least one variation to execute).
 */
export function emitTree(model: ClausePanelModel): ClauseTree {
  const tree: ClauseTree = { must: [], should: [] };
  for (const group of model.groups) {
    const variations = group.variations
      .filter((v) => v.enabled)
      .map(({ text, weight, tier }) => ({ text, weight, tier }));
    if (variations.length === 0) continue;
    tree[group.kind].push({ origin: group.origin, boost: group.boost, variations });
  }
  return tree;
}
