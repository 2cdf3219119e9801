import { defineConfig } from 'vitest/config';

// Fixed port so the happy-dom document origin matches the test service
// (same-origin policy applies inside the simulated browser, exactly as it
// will when the service hosts the built assets under /ui/).
export const TEST_PORT = 8801;

export default defineConfig({
  test: {
    environment: 'happy-dom',
    environmentOptions: {
      happyDOM: {
        url: `http://127.0.0.1:${TEST_PORT}/ui/`,
      },
    },
    globalSetup: './tests/global-setup.ts',
    include: ['tests/**/*.test.ts'],
    testTimeout: 30_000,
    hookTimeout: 60_000,
  },
});
