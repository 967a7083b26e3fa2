import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    include: ["tests/**/*.test.ts"],
    // Several tests shell out to the planner CLI and forward real models.
    testTimeout: 180_000,
    hookTimeout: 180_000,
  },
});
