// Clip playback behind a small interface so session logic and tests can
// run without an audio device.

export interface PlaybackResult {
  completed: boolean;
  durationS: number;
}

export interface ClipPlayer {
  /** Play one clip start to finish; resolves on end or failure. */
  play(clipId: string): Promise<PlaybackResult>;
}

/** Streams clips through an HTMLAudioElement; stereo clips play as-is. */
export class HtmlAudioPlayer implements ClipPlayer {
  constructor(
    private readonly urlFor: (clipId: string) => string,
    private readonly ownerDocument: Document = document,
  ) {}

  play(clipId: string): Promise<PlaybackResult> {
    return new Promise((resolve) => {
      const audio = this.ownerDocument.createElement("audio");
      const startedAt = Date.now();
      audio.addEventListener("ended", () => {
        resolve({
          completed: true,
          durationS: Number.isFinite(audio.duration)
            ? audio.duration
            : (Date.now() - startedAt) / 1000,
        });
      });
      audio.addEventListener("error", () => {
        resolve({ completed: false, durationS: (Date.now() - startedAt) / 1000 });
      });
      audio.src = this.urlFor(clipId);
      void audio.play()?.catch(() => {
        resolve({ completed: false, durationS: 0 });
      });
    });
  }
}
