// The only configuration the client takes: where the service lives.
// Same-origin deployments leave this empty and use relative paths.

export const config = {
  baseUrl: "",
};

export function setBaseUrl(url: string): void {
  config.baseUrl = url.endsWith("/") ? url.slice(0, -1) : url;
}
