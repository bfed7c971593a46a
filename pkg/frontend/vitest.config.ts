import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    include: ["tests/**/*.test.ts"],
    environment: "node",
    // Live tests spawn the engine service; keep files serial so two
    // spawned servers never fight over the same scratch state.
    fileParallelism: false,
    testTimeout: 30000,
    hookTimeout: 30000,
  },
});
