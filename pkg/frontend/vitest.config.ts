import { defineConfig } from "vitest/config";

// Default to node; ui.test.ts opts into happy-dom with a docblock.
export default defineConfig({
  test: {
    environment: "node",
    testTimeout: 120_000,
    hookTimeout: 120_000,
  },
});
