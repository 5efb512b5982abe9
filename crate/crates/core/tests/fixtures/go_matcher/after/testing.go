package testing

type testContext struct {
	match *matcher

	mu sync.Mutex
	//  ... other code ...
}

func (t *T) run(...) bool {
	testName, ok := t.context.match.fullName(&t.common, name)
	if !ok {
		return true
	}
	// ... other code ...
}

func newTestContext(maxParallel int, m *matcher) *testContext {
	return &testContext{
		match:         m,
		startParallel: make(chan bool),
		maxParallel:   maxParallel,
		running:       1, // Set the count to 1 for the main (sequential) test.
	}
}
