// Ordered image listing: ascending capture time, undated images last and
// flagged. Clicking an entry flies the camera to that image's projector.

import type { ImageRecordWire, ProjectorRecord } from "./protocol.js";

export interface ImagePanelEntry {
  imageId: string;
  timestamp: string | null;
  undated: boolean;
  projectorId: number | null;
}

export function orderImages(
  images: ImageRecordWire[],
  projectors: ProjectorRecord[],
): ImagePanelEntry[] {
  const projectorByImage = new Map<string, number>();
  for (const p of projectors) {
    projectorByImage.set(p.image_id, p.projector_id);
  }
  const entries = images.map((img) => ({
    imageId: img.image_id,
    timestamp: img.timestamp,
    undated: img.timestamp === null,
    projectorId: projectorByImage.get(img.image_id) ?? null,
  }));
  // ISO-8601 UTC strings sort chronologically as plain strings
  return entries.sort((a, b) => {
    if (a.undated !== b.undated) return a.undated ? 1 : -1;
    if (!a.undated && a.timestamp !== b.timestamp) {
      return (a.timestamp as string) < (b.timestamp as string) ? -1 : 1;
    }
    return a.imageId < b.imageId ? -1 : a.imageId > b.imageId ? 1 : 0;
  });
}
