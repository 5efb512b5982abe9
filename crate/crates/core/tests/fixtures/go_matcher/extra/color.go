package color

import "fmt"

// RGBA is an 8-bit-per-channel color.
type RGBA struct {
	R, G, B, A uint8
}

// Hex renders the color as #rrggbbaa.
func (c RGBA) Hex() string {
	return fmt.Sprintf("#%02x%02x%02x%02x", c.R, c.G, c.B, c.A)
}

// Blend mixes two colors with weight w in [0, 1].
func Blend(x, y RGBA, w float64) RGBA {
	mix := func(a, b uint8) uint8 {
		return uint8(float64(a)*(1-w) + float64(b)*w)
	}
	return RGBA{mix(x.R, y.R), mix(x.G, y.G), mix(x.B, y.B), mix(x.A, y.A)}
}
